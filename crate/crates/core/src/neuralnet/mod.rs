//! From-scratch CNN engine for the searched demosaicing architectures.
//!
//! Networks are stacks of conv + batch-norm + SELU blocks at constant width
//! with optional identity skips and a 3x3 head; see [`ArchDescriptor`]. All
//! arithmetic is `f64`. Parameters live in one flat store described by
//! [`Segment`]s, which doubles as the checkpoint payload.

mod arch;
mod checkpoint;
mod network;
mod ops;
mod optim;
mod tensor;
mod tiling;
mod train;

use thiserror::Error;

pub use arch::{
    count_params, ArchDescriptor, ConvKind, Schedule, BLOCK_CHOICES, FILTER_CHOICES, KERNEL, MAX_BLOCKS, SKIP_CHOICES,
};
pub use checkpoint::{decode_checkpoint, encode_checkpoint, load_checkpoint, save_checkpoint};
pub use network::{Backward, Mode, Network, Segment, SegmentKind};
pub use ops::{selu, BatchStats, BN_EPS, BN_MOMENTUM, SELU_ALPHA, SELU_LAMBDA};
pub use optim::{lr_at, sgd_step, Optimizer, OptimizerKind};
pub use tensor::Tensor;
pub use tiling::{demosaic_network, mosaic_and_reconstruct, plan_tiles, Rect, Tile, TILE, TILE_MARGIN};
pub use train::{evaluate_patches, mosaic_batch, reconstruct_patches, train, EpochRecord, TrainConfig};

#[derive(Debug, Error)]
pub enum NetError {
    #[error("invalid architecture: {0}")]
    InvalidArch(String),
    #[error("invalid training configuration: {0}")]
    InvalidConfig(String),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("loss is not finite")]
    NonFiniteLoss,
    #[error("training diverged (non-finite loss) in epoch {epoch}")]
    Diverged { epoch: usize },
    #[error("checkpoint does not match its architecture: expected {expected} parameters, found {found}")]
    ArchMismatch { expected: usize, found: usize },
    #[error("bad checkpoint: {0}")]
    Checkpoint(String),
    #[error("{0}")]
    Io(String),
    #[error(transparent)]
    Metrics(#[from] crate::metrics::MetricsError),
}
