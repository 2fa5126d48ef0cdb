use std::path::PathBuf;
use std::time::Instant;

use crate::imaging::PatchSet;
use crate::neuralnet::{count_params, evaluate_patches, save_checkpoint, train, ArchDescriptor, Network, TrainConfig};

/// What an evaluator reports for one architecture.
#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub loss: f64,
    pub std_error: f64,
    pub wall_time: f64,
    pub lr: Option<f64>,
    pub l2: Option<f64>,
}

/// Black-box `arch -> loss`. Called concurrently when the search runs with
/// more than one job.
pub trait Evaluator: Sync {
    fn evaluate(&self, arch: &ArchDescriptor) -> Result<Evaluation, String>;

    /// Seed recorded alongside every trial.
    fn seed(&self) -> u64 {
        0
    }
}

impl<F> Evaluator for F
where
    F: Fn(&ArchDescriptor) -> Result<Evaluation, String> + Sync,
{
    fn evaluate(&self, arch: &ArchDescriptor) -> Result<Evaluation, String> {
        self(arch)
    }
}

/// Loss = parameter count, zero error and zero wall time. Lets search logic
/// run without training.
#[derive(Debug, Clone, Copy, Default)]
pub struct StubEvaluator {
    pub seed: u64,
}

impl Evaluator for StubEvaluator {
    fn evaluate(&self, arch: &ArchDescriptor) -> Result<Evaluation, String> {
        Ok(Evaluation {
            loss: count_params(arch) as f64,
            std_error: 0.0,
            wall_time: 0.0,
            lr: None,
            l2: None,
        })
    }

    fn seed(&self) -> u64 {
        self.seed
    }
}

/// Builds the network from `seed`, trains it, and reports `-cpsnr` on the
/// validation patches.
#[derive(Debug, Clone)]
pub struct TrainingEvaluator {
    pub train: PatchSet,
    pub valid: PatchSet,
    pub config: TrainConfig,
    pub seed: u64,
    /// When set, each trained network is saved as `<dir>/<arch key>.dmnn`.
    pub checkpoint_dir: Option<PathBuf>,
}

impl Evaluator for TrainingEvaluator {
    fn evaluate(&self, arch: &ArchDescriptor) -> Result<Evaluation, String> {
        let start = Instant::now();
        let mut net = Network::build(*arch, self.seed).map_err(|e| e.to_string())?;
        train(&mut net, &self.train, &self.valid, &self.config).map_err(|e| e.to_string())?;
        let report = evaluate_patches(&net, &self.valid.patches, self.config.pattern).map_err(|e| e.to_string())?;
        if let Some(dir) = &self.checkpoint_dir {
            save_checkpoint(&net, dir.join(format!("{}.dmnn", arch.key()))).map_err(|e| e.to_string())?;
        }
        Ok(Evaluation {
            loss: -report.cpsnr,
            std_error: report.std_error,
            wall_time: start.elapsed().as_secs_f64(),
            lr: Some(self.config.lr),
            l2: Some(self.config.l2),
        })
    }

    fn seed(&self) -> u64 {
        self.seed
    }
}
