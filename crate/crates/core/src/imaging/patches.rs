//! Random square patch extraction.
//!
//! The sampler is ChaCha8 (a counter-based stream cipher RNG) seeded from the
//! 64-bit seed. For each patch it draws, in order: the source index uniformly
//! from `0..sources`, then the top-left row and column uniformly from
//! `0..=height-size` and `0..=width-size`.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{load_ppm, save_ppm, Image, ImagingError, Result};

pub const DEFAULT_PATCH_SIZE: usize = 32;

const MANIFEST: &str = "manifest.txt";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PatchOrigin {
    pub source: String,
    pub row: usize,
    pub col: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PatchSet {
    pub patches: Vec<Image>,
    pub origins: Vec<PatchOrigin>,
    pub seed: u64,
}

impl PatchSet {
    pub fn len(&self) -> usize {
        self.patches.len()
    }

    pub fn is_empty(&self) -> bool {
        self.patches.is_empty()
    }

    /// Writes `patch_NNNNNN.ppm` files plus `manifest.txt` into `dir`.
    pub fn write_dir(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        fs::create_dir_all(dir).map_err(|source| ImagingError::Io {
            path: dir.to_path_buf(),
            source,
        })?;
        let mut manifest = format!("seed {}\n", self.seed);
        for (k, (patch, origin)) in self.patches.iter().zip(&self.origins).enumerate() {
            save_ppm(patch, dir.join(patch_file_name(k)))?;
            writeln!(manifest, "{},{},{}", origin.source, origin.row, origin.col).unwrap();
        }
        let path = dir.join(MANIFEST);
        fs::write(&path, manifest).map_err(|source| ImagingError::Io { path, source })
    }

    pub fn read_dir(dir: impl AsRef<Path>) -> Result<PatchSet> {
        let dir = dir.as_ref();
        let path = dir.join(MANIFEST);
        let text = fs::read_to_string(&path).map_err(|source| ImagingError::Io { path, source })?;
        let mut lines = text.lines();
        let seed = lines
            .next()
            .and_then(|l| l.strip_prefix("seed "))
            .and_then(|s| s.trim().parse().ok())
            .ok_or_else(|| ImagingError::Manifest("first line must be `seed <u64>`".into()))?;
        let mut set = PatchSet {
            patches: Vec::new(),
            origins: Vec::new(),
            seed,
        };
        for (k, line) in lines.filter(|l| !l.trim().is_empty()).enumerate() {
            // Source names may contain commas; row and col are the last two fields.
            let mut parts = line.rsplitn(3, ',');
            let (col, row, source) = (parts.next(), parts.next(), parts.next());
            let (Some(col), Some(row), Some(source)) = (col, row, source) else {
                return Err(ImagingError::Manifest(format!("bad provenance line `{line}`")));
            };
            let parse = |s: &str| {
                s.trim()
                    .parse::<usize>()
                    .map_err(|_| ImagingError::Manifest(format!("bad provenance line `{line}`")))
            };
            set.origins.push(PatchOrigin {
                source: source.to_string(),
                row: parse(row)?,
                col: parse(col)?,
            });
            set.patches.push(load_ppm(dir.join(patch_file_name(k)))?);
        }
        Ok(set)
    }
}

fn patch_file_name(k: usize) -> String {
    format!("patch_{k:06}.ppm")
}

/// Draws `count` random `size x size` patches from named sources.
pub fn sample_patches<S: AsRef<str>>(
    sources: &[(S, &Image)],
    count: usize,
    size: usize,
    seed: u64,
) -> Result<PatchSet> {
    if sources.is_empty() || count == 0 || size == 0 {
        return Err(ImagingError::EmptySampling);
    }
    for (name, img) in sources {
        if img.height() < size || img.width() < size {
            return Err(ImagingError::SourceTooSmall {
                name: name.as_ref().to_string(),
                height: img.height(),
                width: img.width(),
                size,
            });
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut set = PatchSet {
        patches: Vec::with_capacity(count),
        origins: Vec::with_capacity(count),
        seed,
    };
    for _ in 0..count {
        let (name, img) = &sources[rng.random_range(0..sources.len())];
        let row = rng.random_range(0..=img.height() - size);
        let col = rng.random_range(0..=img.width() - size);
        set.patches.push(img.crop(row, col, size, size));
        set.origins.push(PatchOrigin {
            source: name.as_ref().to_string(),
            row,
            col,
        });
    }
    Ok(set)
}
