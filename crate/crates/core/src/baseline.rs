//! Bilinear demosaicing.
//!
//! Stencils per site class, for a missing channel `c` at pixel `(i, j)`:
//!
//! * G at an R or B site: mean of the 4 edge neighbours `(i±1, j)`, `(i, j±1)`.
//! * R (or B) at a G site: mean of the 2 collinear neighbours. Whether they
//!   lie horizontally or vertically depends on which row of the tile the G
//!   sits in; the pair that carries channel `c` is the one used.
//! * R at a B site (or B at an R site): mean of the 4 diagonal neighbours.
//!
//! Samples beyond the border come from reflecting the coordinate about the
//! edge pixel (`-1 -> 1`, `n -> n-2`). Reflection preserves Bayer parity, so
//! each out-of-range sample is replaced by the nearest same-colour sample of
//! the sampling grid, which makes constant images reconstruct exactly
//! everywhere.

use thiserror::Error;

use crate::exec::Exec;
use crate::imaging::{BayerPattern, Image};

#[derive(Debug, Error, PartialEq)]
pub enum BaselineError {
    #[error("bilinear demosaicing needs at least a 2x2 mosaic, got {0}x{1}")]
    TooSmall(usize, usize),
}

#[inline]
fn reflect(x: isize, n: usize) -> usize {
    if x < 0 {
        (-x) as usize
    } else if x as usize >= n {
        2 * (n - 1) - x as usize
    } else {
        x as usize
    }
}

pub fn demosaic_bilinear(mosaic: &Image, pattern: BayerPattern) -> Result<Image, BaselineError> {
    demosaic_bilinear_with(Exec::default(), mosaic, pattern)
}

pub fn demosaic_bilinear_with(exec: Exec, mosaic: &Image, pattern: BayerPattern) -> Result<Image, BaselineError> {
    let (h, w) = mosaic.dims();
    if h < 2 || w < 2 {
        return Err(BaselineError::TooSmall(h, w));
    }
    let sample = |i: isize, j: isize, c: usize| mosaic.get(reflect(i, h), reflect(j, w), c);
    let mut out = Image::new(h, w);
    exec.for_each_chunk_mut(out.data_mut(), w * 3, |row, dst| {
        let i = row as isize;
        for col in 0..w {
            let j = col as isize;
            let site = pattern.channel_at(row, col).index();
            for c in 0..3 {
                dst[col * 3 + c] = if c == site {
                    mosaic.get(row, col, c)
                } else if c == 1 {
                    (sample(i - 1, j, 1) + sample(i + 1, j, 1) + sample(i, j - 1, 1) + sample(i, j + 1, 1)) / 4.0
                } else if site == 1 {
                    // Same-row neighbours carry channel c iff the horizontal
                    // neighbour's filter is c.
                    if pattern.channel_at(row, col ^ 1).index() == c {
                        (sample(i, j - 1, c) + sample(i, j + 1, c)) / 2.0
                    } else {
                        (sample(i - 1, j, c) + sample(i + 1, j, c)) / 2.0
                    }
                } else {
                    (sample(i - 1, j - 1, c)
                        + sample(i - 1, j + 1, c)
                        + sample(i + 1, j - 1, c)
                        + sample(i + 1, j + 1, c))
                        / 4.0
                };
            }
        }
    });
    Ok(out)
}
