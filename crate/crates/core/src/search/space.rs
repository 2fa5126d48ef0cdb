use serde::{Deserialize, Serialize};

use crate::neuralnet::{ArchDescriptor, ConvKind, Schedule, BLOCK_CHOICES, FILTER_CHOICES, SKIP_CHOICES};

/// Per-dimension option lists. The default is the full 120-point space.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SpaceSpec {
    pub filters: Vec<usize>,
    pub blocks: Vec<usize>,
    pub conv_kinds: Vec<ConvKind>,
    pub skip_lengths: Vec<usize>,
    pub schedules: Vec<Schedule>,
}

impl Default for SpaceSpec {
    fn default() -> Self {
        SpaceSpec {
            filters: FILTER_CHOICES.to_vec(),
            blocks: BLOCK_CHOICES.to_vec(),
            conv_kinds: vec![ConvKind::Standard, ConvKind::Separable],
            skip_lengths: SKIP_CHOICES.to_vec(),
            schedules: vec![Schedule::Fixed, Schedule::Cosine],
        }
    }
}

impl SpaceSpec {
    /// Cross product, filters outermost and schedule innermost. Repeated
    /// options are kept once, at their first position.
    pub fn enumerate(&self) -> Vec<ArchDescriptor> {
        let filters = dedup(&self.filters);
        let blocks = dedup(&self.blocks);
        let kinds = dedup(&self.conv_kinds);
        let skips = dedup(&self.skip_lengths);
        let schedules = dedup(&self.schedules);
        let mut out = Vec::with_capacity(filters.len() * blocks.len() * kinds.len() * skips.len() * schedules.len());
        for &f in &filters {
            for &b in &blocks {
                for &k in &kinds {
                    for &s in &skips {
                        for &sc in &schedules {
                            out.push(ArchDescriptor::new(f, b, k, s, sc));
                        }
                    }
                }
            }
        }
        out
    }
}

fn dedup<T: PartialEq + Copy>(xs: &[T]) -> Vec<T> {
    let mut out: Vec<T> = Vec::with_capacity(xs.len());
    for &x in xs {
        if !out.contains(&x) {
            out.push(x);
        }
    }
    out
}

/// The full space in enumeration order.
pub fn enumerate_space() -> Vec<ArchDescriptor> {
    SpaceSpec::default().enumerate()
}
