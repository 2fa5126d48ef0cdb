//! Versioned little-endian checkpoint format.
//!
//! ```text
//! offset  size  field
//!      0     4  magic "DMNN"
//!      4     4  version (u32) = 1
//!      8     4  filters (u32)
//!     12     4  blocks (u32)
//!     16     1  conv kind (0 = standard, 1 = separable)
//!     17     4  skip length (u32)
//!     21     1  schedule (0 = fixed, 1 = cosine)
//!     22     8  init seed (u64)
//!     30     8  parameter count P (u64)
//!     38   8*P  parameters (f64), in layout order
//! ```

use std::fs;
use std::path::Path;

use super::arch::{count_params, ArchDescriptor, ConvKind, Schedule};
use super::network::Network;
use super::NetError;

pub const MAGIC: &[u8; 4] = b"DMNN";
pub const VERSION: u32 = 1;
const HEADER_LEN: usize = 38;

pub fn encode_checkpoint(net: &Network) -> Vec<u8> {
    let arch = net.arch();
    let mut out = Vec::with_capacity(HEADER_LEN + 8 * net.params().len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(arch.filters as u32).to_le_bytes());
    out.extend_from_slice(&(arch.blocks as u32).to_le_bytes());
    out.push(match arch.conv_kind {
        ConvKind::Standard => 0,
        ConvKind::Separable => 1,
    });
    out.extend_from_slice(&(arch.skip_length as u32).to_le_bytes());
    out.push(match arch.schedule {
        Schedule::Fixed => 0,
        Schedule::Cosine => 1,
    });
    out.extend_from_slice(&net.seed().to_le_bytes());
    out.extend_from_slice(&(net.params().len() as u64).to_le_bytes());
    for p in net.params() {
        out.extend_from_slice(&p.to_le_bytes());
    }
    out
}

pub fn decode_checkpoint(bytes: &[u8]) -> Result<Network, NetError> {
    let bad = |msg: &str| NetError::Checkpoint(msg.to_string());
    if bytes.len() < HEADER_LEN {
        return Err(bad("file shorter than the header"));
    }
    if &bytes[0..4] != MAGIC {
        return Err(bad("bad magic (expected DMNN)"));
    }
    let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().unwrap());
    let u64_at = |o: usize| u64::from_le_bytes(bytes[o..o + 8].try_into().unwrap());
    let version = u32_at(4);
    if version != VERSION {
        return Err(NetError::Checkpoint(format!("unsupported version {version}")));
    }
    let conv_kind = match bytes[16] {
        0 => ConvKind::Standard,
        1 => ConvKind::Separable,
        k => return Err(NetError::Checkpoint(format!("unknown conv kind tag {k}"))),
    };
    let schedule = match bytes[21] {
        0 => Schedule::Fixed,
        1 => Schedule::Cosine,
        s => return Err(NetError::Checkpoint(format!("unknown schedule tag {s}"))),
    };
    let arch = ArchDescriptor::new(
        u32_at(8) as usize,
        u32_at(12) as usize,
        conv_kind,
        u32_at(17) as usize,
        schedule,
    );
    arch.validate()?;
    let seed = u64_at(22);
    let count = u64_at(30) as usize;
    let expected = count_params(&arch);
    if count != expected {
        return Err(NetError::ArchMismatch { expected, found: count });
    }
    let payload = &bytes[HEADER_LEN..];
    if payload.len() != 8 * count {
        return Err(NetError::Checkpoint(format!(
            "payload holds {} bytes, header promises {}",
            payload.len(),
            8 * count
        )));
    }
    let params = payload
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    Network::from_params(arch, seed, params)
}

pub fn save_checkpoint(net: &Network, path: impl AsRef<Path>) -> Result<(), NetError> {
    let path = path.as_ref();
    fs::write(path, encode_checkpoint(net)).map_err(|e| NetError::Io(format!("{}: {e}", path.display())))
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<Network, NetError> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| NetError::Io(format!("{}: {e}", path.display())))?;
    decode_checkpoint(&bytes)
}
