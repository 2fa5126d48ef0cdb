use super::Image;

/// Test-pattern generators. Values are clamped to `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SynthKind {
    Constant(f64),
    /// Channel `c` at `(i, j)` is `row[c] * i + col[c] * j + offset[c]`.
    Affine {
        row: [f64; 3],
        col: [f64; 3],
        offset: [f64; 3],
    },
    /// Grey `0.5 + 0.5 cos(freq (i^2 + j^2))`; high frequencies provoke
    /// zipper and false-colour artefacts in interpolating demosaicers.
    ZonePlate(f64),
}

pub fn synth_image(kind: SynthKind, height: usize, width: usize) -> Image {
    match kind {
        SynthKind::Constant(v) => Image::from_fn(height, width, |_, _, _| v.clamp(0.0, 1.0)),
        SynthKind::Affine { row, col, offset } => Image::from_fn(height, width, |i, j, c| {
            (row[c] * i as f64 + col[c] * j as f64 + offset[c]).clamp(0.0, 1.0)
        }),
        SynthKind::ZonePlate(freq) => Image::from_fn(height, width, |i, j, _| {
            let r2 = (i * i + j * j) as f64;
            (0.5 + 0.5 * (freq * r2).cos()).clamp(0.0, 1.0)
        }),
    }
}
