//! Bayer demosaicing toolkit and architecture-search harness.
//!
//! * [`imaging`]: RGB rasters, CFA mosaicing, patch sampling, PPM I/O.
//! * [`metrics`]: MSE / CMSE / PSNR and the dataset CPSNR report.
//! * [`baseline`]: bilinear demosaicing.
//! * [`neuralnet`]: a from-scratch CNN engine for the searched architectures.
//! * [`search`]: exhaustive and grid search, Lipschitz diagnostics, Pareto fronts.
//!
//! Data-parallel kernels honour [`Exec`]; the `parallel` cargo feature (on by
//! default) backs them with rayon.

pub mod baseline;
pub mod exec;
pub mod imaging;
pub mod metrics;
pub mod neuralnet;
pub mod search;

pub use exec::Exec;
