//! Binary (P6) PPM with maxval 255.
//!
//! Decoding maps byte `b` to `b / 255`; encoding maps `v` to
//! `floor(v * 255 + 0.5)` clamped to `[0, 255]`. Since `b / 255 * 255` rounds
//! back to `b`, decode then encode reproduces the payload exactly, and the
//! whole file when its header is in the canonical `P6\n<w> <h>\n255\n` layout.

use std::fs;
use std::path::Path;

use super::{Image, ImagingError, Result};

pub fn decode_ppm(bytes: &[u8]) -> Result<Image> {
    let mut pos = 0;
    let magic = next_token(bytes, &mut pos)?;
    if magic != b"P6" {
        return Err(ImagingError::MalformedHeader(format!(
            "expected magic `P6`, found `{}`",
            String::from_utf8_lossy(magic)
        )));
    }
    let width = parse_number(next_token(bytes, &mut pos)?, "width")?;
    let height = parse_number(next_token(bytes, &mut pos)?, "height")?;
    let maxval = parse_number(next_token(bytes, &mut pos)?, "maxval")?;
    if width == 0 || height == 0 {
        return Err(ImagingError::MalformedHeader(format!(
            "zero dimension {width}x{height}"
        )));
    }
    if maxval != 255 {
        return Err(ImagingError::UnsupportedMaxval(maxval as u32));
    }
    // Exactly one whitespace byte separates maxval from the raster.
    match bytes.get(pos) {
        Some(b) if b.is_ascii_whitespace() => pos += 1,
        _ => return Err(ImagingError::MalformedHeader("missing whitespace after maxval".into())),
    }
    let expected = width * height * 3;
    let payload = &bytes[pos..];
    if payload.len() < expected {
        return Err(ImagingError::TruncatedPayload {
            expected,
            found: payload.len(),
        });
    }
    let data = payload[..expected].iter().map(|&b| f64::from(b) / 255.0).collect();
    Image::from_vec(height, width, data)
}

pub fn encode_ppm(img: &Image) -> Vec<u8> {
    let mut out = format!("P6\n{} {}\n255\n", img.width(), img.height()).into_bytes();
    out.extend(img.data().iter().map(|&v| quantize(v)));
    out
}

pub fn load_ppm(path: impl AsRef<Path>) -> Result<Image> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|source| ImagingError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    decode_ppm(&bytes)
}

pub fn save_ppm(img: &Image, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, encode_ppm(img)).map_err(|source| ImagingError::Io {
        path: path.to_path_buf(),
        source,
    })
}

#[inline]
fn quantize(v: f64) -> u8 {
    if v.is_nan() {
        return 0;
    }
    (v * 255.0 + 0.5).floor().clamp(0.0, 255.0) as u8
}

fn next_token<'a>(bytes: &'a [u8], pos: &mut usize) -> Result<&'a [u8]> {
    loop {
        match bytes.get(*pos) {
            Some(b) if b.is_ascii_whitespace() => *pos += 1,
            Some(b'#') => {
                while let Some(&b) = bytes.get(*pos) {
                    *pos += 1;
                    if b == b'\n' || b == b'\r' {
                        break;
                    }
                }
            }
            Some(_) => break,
            None => return Err(ImagingError::MalformedHeader("unexpected end of header".into())),
        }
    }
    let start = *pos;
    while let Some(b) = bytes.get(*pos) {
        if b.is_ascii_whitespace() || *b == b'#' {
            break;
        }
        *pos += 1;
    }
    Ok(&bytes[start..*pos])
}

fn parse_number(token: &[u8], what: &str) -> Result<usize> {
    std::str::from_utf8(token)
        .ok()
        .filter(|s| !s.is_empty() && s.bytes().all(|b| b.is_ascii_digit()))
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| ImagingError::MalformedHeader(format!("bad {what} `{}`", String::from_utf8_lossy(token))))
}
