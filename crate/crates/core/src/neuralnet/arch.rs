use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::NetError;

/// Spatial kernel size of every trunk convolution.
pub const KERNEL: usize = 3;
/// Largest block count accepted (the deep constant-width reference model).
pub const MAX_BLOCKS: usize = 20;

pub const FILTER_CHOICES: [usize; 5] = [16, 32, 64, 128, 256];
pub const BLOCK_CHOICES: [usize; 3] = [3, 5, 7];
pub const SKIP_CHOICES: [usize; 2] = [1, 2];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConvKind {
    Standard,
    /// Per-channel 3x3 followed by a 1x1 pointwise mix.
    Separable,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Schedule {
    Fixed,
    Cosine,
}

/// One point of the architecture space.
///
/// The network is `blocks` conv+BN+SELU blocks at constant width `filters`
/// (the first block maps the 3-channel mosaic up to `filters`), identity
/// skips around every run of `skip_length` trunk blocks, and a 3x3 head back
/// to 3 channels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ArchDescriptor {
    pub filters: usize,
    pub blocks: usize,
    pub conv_kind: ConvKind,
    pub skip_length: usize,
    pub schedule: Schedule,
}

impl ArchDescriptor {
    pub fn new(filters: usize, blocks: usize, conv_kind: ConvKind, skip_length: usize, schedule: Schedule) -> Self {
        ArchDescriptor {
            filters,
            blocks,
            conv_kind,
            skip_length,
            schedule,
        }
    }

    pub fn validate(&self) -> Result<(), NetError> {
        if self.filters == 0 {
            return Err(NetError::InvalidArch("filters must be positive".into()));
        }
        if !(1..=MAX_BLOCKS).contains(&self.blocks) {
            return Err(NetError::InvalidArch(format!(
                "blocks must be in 1..={MAX_BLOCKS}, got {}",
                self.blocks
            )));
        }
        if self.skip_length == 0 {
            return Err(NetError::InvalidArch("skip_length must be positive".into()));
        }
        Ok(())
    }

    /// Residual groups as half-open block ranges `[start, end)`. The output of
    /// block `end - 1` gets the input of block `start` added. Groups tile the
    /// trunk (blocks `1..blocks`); a trailing partial group has no skip.
    pub fn skip_groups(&self) -> Vec<(usize, usize)> {
        let trunk = self.blocks.saturating_sub(1);
        (0..trunk / self.skip_length)
            .map(|g| {
                let start = 1 + g * self.skip_length;
                (start, start + self.skip_length)
            })
            .collect()
    }

    /// Canonical key, e.g. `f16-b3-standard-s1-fixed`.
    pub fn key(&self) -> String {
        self.to_string()
    }
}

impl fmt::Display for ConvKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ConvKind::Standard => "standard",
            ConvKind::Separable => "separable",
        })
    }
}

impl FromStr for ConvKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "standard" => Ok(ConvKind::Standard),
            "separable" | "depthwise_separable" => Ok(ConvKind::Separable),
            _ => Err(format!("unknown conv kind `{s}`")),
        }
    }
}

impl fmt::Display for Schedule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Schedule::Fixed => "fixed",
            Schedule::Cosine => "cosine",
        })
    }
}

impl FromStr for Schedule {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "fixed" => Ok(Schedule::Fixed),
            "cosine" => Ok(Schedule::Cosine),
            _ => Err(format!("unknown schedule `{s}`")),
        }
    }
}

impl fmt::Display for ArchDescriptor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "f{}-b{}-{}-s{}-{}",
            self.filters, self.blocks, self.conv_kind, self.skip_length, self.schedule
        )
    }
}

impl FromStr for ArchDescriptor {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        let bad = || format!("malformed architecture key `{s}`");
        let parts: Vec<&str> = s.split('-').collect();
        let [f, b, kind, skip, sched] = parts.as_slice() else {
            return Err(bad());
        };
        let num = |p: &str, prefix: char| {
            p.strip_prefix(prefix)
                .and_then(|n| n.parse::<usize>().ok())
                .ok_or_else(bad)
        };
        Ok(ArchDescriptor {
            filters: num(f, 'f')?,
            blocks: num(b, 'b')?,
            conv_kind: kind.parse()?,
            skip_length: num(skip, 's')?,
            schedule: sched.parse()?,
        })
    }
}

pub(crate) fn standard_conv_params(cin: usize, cout: usize, kernel: usize) -> usize {
    kernel * kernel * cin * cout + cout
}

pub(crate) fn separable_conv_params(cin: usize, cout: usize) -> usize {
    KERNEL * KERNEL * cin + cin + cin * cout + cout
}

/// Closed-form parameter count, batch-norm running statistics included.
pub fn count_params(arch: &ArchDescriptor) -> usize {
    let f = arch.filters;
    let input = standard_conv_params(3, f, KERNEL);
    let trunk_block = match arch.conv_kind {
        ConvKind::Standard => standard_conv_params(f, f, KERNEL),
        ConvKind::Separable => separable_conv_params(f, f),
    };
    let head = standard_conv_params(f, 3, KERNEL);
    let batch_norm = 4 * f;
    input + arch.blocks.saturating_sub(1) * trunk_block + head + arch.blocks * batch_norm
}
