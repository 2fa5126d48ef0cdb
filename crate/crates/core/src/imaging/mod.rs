//! RGB rasters, Bayer colour-filter mosaicing, patch sampling, synthetic test
//! images and binary PPM I/O.

mod patches;
mod ppm;
mod synth;

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::exec::Exec;

pub use patches::{sample_patches, PatchOrigin, PatchSet, DEFAULT_PATCH_SIZE};
pub use ppm::{decode_ppm, encode_ppm, load_ppm, save_ppm};
pub use synth::{synth_image, SynthKind};

#[derive(Debug, Error)]
pub enum ImagingError {
    #[error("invalid image dimensions {height}x{width} with {len} samples")]
    InvalidDimensions { height: usize, width: usize, len: usize },
    #[error("source image `{name}` is {height}x{width}, smaller than the {size}x{size} patch")]
    SourceTooSmall {
        name: String,
        height: usize,
        width: usize,
        size: usize,
    },
    #[error("patch sampling needs at least one source and a positive count and size")]
    EmptySampling,
    #[error("malformed PPM header: {0}")]
    MalformedHeader(String),
    #[error("truncated PPM payload: expected {expected} bytes, found {found}")]
    TruncatedPayload { expected: usize, found: usize },
    #[error("unsupported PPM maxval {0} (only 255 is accepted)")]
    UnsupportedMaxval(u32),
    #[error("malformed patch manifest: {0}")]
    Manifest(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T, E = ImagingError> = std::result::Result<T, E>;

/// Colour channel index within a pixel triple.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ChannelId {
    R = 0,
    G = 1,
    B = 2,
}

impl ChannelId {
    pub const ALL: [ChannelId; 3] = [ChannelId::R, ChannelId::G, ChannelId::B];

    pub fn index(self) -> usize {
        self as usize
    }
}

/// An `height x width` RGB raster, pixel-interleaved, intensities in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    height: usize,
    width: usize,
    data: Vec<f64>,
}

impl Image {
    /// All-zero image.
    pub fn new(height: usize, width: usize) -> Self {
        assert!(height >= 1 && width >= 1, "image must be at least 1x1");
        Image {
            height,
            width,
            data: vec![0.0; height * width * 3],
        }
    }

    /// Wraps interleaved `R,G,B` samples in row-major pixel order.
    pub fn from_vec(height: usize, width: usize, data: Vec<f64>) -> Result<Self> {
        if height == 0 || width == 0 || data.len() != height * width * 3 {
            return Err(ImagingError::InvalidDimensions {
                height,
                width,
                len: data.len(),
            });
        }
        Ok(Image { height, width, data })
    }

    pub fn from_fn(height: usize, width: usize, f: impl Fn(usize, usize, usize) -> f64) -> Self {
        let mut img = Image::new(height, width);
        for i in 0..height {
            for j in 0..width {
                for c in 0..3 {
                    img.data[(i * width + j) * 3 + c] = f(i, j, c);
                }
            }
        }
        img
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize, channel: usize) -> f64 {
        self.data[(row * self.width + col) * 3 + channel]
    }

    #[inline]
    pub fn set(&mut self, row: usize, col: usize, channel: usize, value: f64) {
        self.data[(row * self.width + col) * 3 + channel] = value;
    }

    pub fn pixel(&self, row: usize, col: usize) -> [f64; 3] {
        let o = (row * self.width + col) * 3;
        [self.data[o], self.data[o + 1], self.data[o + 2]]
    }

    /// Copies the `height x width` window whose top-left corner is `(row, col)`.
    pub fn crop(&self, row: usize, col: usize, height: usize, width: usize) -> Image {
        assert!(row + height <= self.height && col + width <= self.width);
        let mut out = Vec::with_capacity(height * width * 3);
        for i in row..row + height {
            let start = (i * self.width + col) * 3;
            out.extend_from_slice(&self.data[start..start + width * 3]);
        }
        Image {
            height,
            width,
            data: out,
        }
    }

    /// Clamps every sample into `[0, 1]`; NaN maps to 0.
    pub fn clamp_unit(&mut self) {
        for v in &mut self.data {
            *v = if v.is_nan() { 0.0 } else { v.clamp(0.0, 1.0) };
        }
    }
}

/// Bayer tile variant, named by the 2x2 tile anchored at pixel (0, 0) read
/// row-major.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum BayerPattern {
    #[default]
    Rggb,
    Bggr,
    Grbg,
    Gbrg,
}

impl BayerPattern {
    pub const ALL: [BayerPattern; 4] = [
        BayerPattern::Rggb,
        BayerPattern::Bggr,
        BayerPattern::Grbg,
        BayerPattern::Gbrg,
    ];

    /// The 2x2 tile, `tile()[row % 2][col % 2]`.
    pub fn tile(self) -> [[ChannelId; 2]; 2] {
        use ChannelId::*;
        match self {
            BayerPattern::Rggb => [[R, G], [G, B]],
            BayerPattern::Bggr => [[B, G], [G, R]],
            BayerPattern::Grbg => [[G, R], [B, G]],
            BayerPattern::Gbrg => [[G, B], [R, G]],
        }
    }

    #[inline]
    pub fn channel_at(self, row: usize, col: usize) -> ChannelId {
        self.tile()[row & 1][col & 1]
    }
}

impl fmt::Display for BayerPattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BayerPattern::Rggb => "RGGB",
            BayerPattern::Bggr => "BGGR",
            BayerPattern::Grbg => "GRBG",
            BayerPattern::Gbrg => "GBRG",
        })
    }
}

impl FromStr for BayerPattern {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.to_ascii_uppercase().as_str() {
            "RGGB" => Ok(BayerPattern::Rggb),
            "BGGR" => Ok(BayerPattern::Bggr),
            "GRBG" => Ok(BayerPattern::Grbg),
            "GBRG" => Ok(BayerPattern::Gbrg),
            _ => Err(format!(
                "unknown Bayer pattern `{s}` (expected RGGB, BGGR, GRBG or GBRG)"
            )),
        }
    }
}

/// Samples `img` through the colour filter array: each pixel keeps only the
/// channel its filter passes, the other two are zero-filled.
pub fn mosaic(img: &Image, pattern: BayerPattern) -> Image {
    mosaic_with(Exec::default(), img, pattern)
}

pub fn mosaic_with(exec: Exec, img: &Image, pattern: BayerPattern) -> Image {
    let width = img.width;
    let mut out = Image::new(img.height, width);
    exec.for_each_chunk_mut(&mut out.data, width * 3, |row, dst| {
        let src = &img.data[row * width * 3..(row + 1) * width * 3];
        for col in 0..width {
            let c = pattern.channel_at(row, col).index();
            dst[col * 3 + c] = src[col * 3 + c];
        }
    });
    out
}
