use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::imaging::{mosaic, BayerPattern, Image, PatchSet};
use crate::metrics::{cpsnr_report, ScoreReport};

use super::network::Network;
use super::optim::{lr_at, Optimizer, OptimizerKind};
use super::tensor::Tensor;
use super::NetError;

/// Inference batch size used when scoring patch sets.
const EVAL_CHUNK: usize = 64;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub lr: f64,
    pub l2: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub optimizer: OptimizerKind,
    /// Floor of the cosine schedule.
    pub lr_min: f64,
    /// Number of cosine annealing cycles over the run.
    pub cycles: usize,
    pub pattern: BayerPattern,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            lr: 1e-4,
            l2: 1e-8,
            epochs: 1,
            batch_size: 8,
            seed: 0,
            optimizer: OptimizerKind::Adam,
            lr_min: 0.0,
            cycles: 1,
            pattern: BayerPattern::Rggb,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), NetError> {
        if self.lr.is_nan() || self.lr <= 0.0 {
            return Err(NetError::InvalidConfig(format!("lr must be positive, got {}", self.lr)));
        }
        if self.l2.is_nan() || self.l2 < 0.0 {
            return Err(NetError::InvalidConfig(format!(
                "l2 must be non-negative, got {}",
                self.l2
            )));
        }
        if self.batch_size == 0 || self.cycles == 0 {
            return Err(NetError::InvalidConfig("batch_size and cycles must be positive".into()));
        }
        if !(self.lr_min >= 0.0 && self.lr_min <= self.lr) {
            return Err(NetError::InvalidConfig("lr_min must lie in [0, lr]".into()));
        }
        Ok(())
    }
}

/// One line of training history.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub valid_cpsnr: f64,
    pub lr: f64,
}

/// Mosaics every patch (the network input) and stacks inputs and targets.
pub fn mosaic_batch(patches: &[&Image], pattern: BayerPattern) -> Result<(Tensor, Tensor), NetError> {
    let mosaics: Vec<Image> = patches.iter().map(|p| mosaic(p, pattern)).collect();
    let refs: Vec<&Image> = mosaics.iter().collect();
    Ok((Tensor::from_images(&refs)?, Tensor::from_images(patches)?))
}

/// Eval-mode reconstructions of `patches`, clamped to `[0, 1]`.
pub fn reconstruct_patches(net: &Network, patches: &[Image], pattern: BayerPattern) -> Result<Vec<Image>, NetError> {
    let mut out = Vec::with_capacity(patches.len());
    for chunk in patches.chunks(EVAL_CHUNK) {
        let refs: Vec<&Image> = chunk.iter().collect();
        let (input, _) = mosaic_batch(&refs, pattern)?;
        for mut img in net.infer(&input)?.to_images()? {
            img.clamp_unit();
            out.push(img);
        }
    }
    Ok(out)
}

/// CPSNR of the network's reconstructions against the ground-truth patches.
pub fn evaluate_patches(net: &Network, patches: &[Image], pattern: BayerPattern) -> Result<ScoreReport, NetError> {
    let recon = reconstruct_patches(net, patches, pattern)?;
    Ok(cpsnr_report(patches, &recon)?)
}

/// Trains `net` in place on `(mosaic(patch), patch)` pairs.
///
/// Each epoch reshuffles the training patches with a ChaCha8 stream seeded by
/// `cfg.seed`, steps once per batch, then scores the validation set in eval
/// mode. The run is a pure function of its inputs.
pub fn train(
    net: &mut Network,
    train_set: &PatchSet,
    valid_set: &PatchSet,
    cfg: &TrainConfig,
) -> Result<Vec<EpochRecord>, NetError> {
    cfg.validate()?;
    if train_set.is_empty() || valid_set.is_empty() {
        return Err(NetError::InvalidConfig(
            "training and validation sets must be non-empty".into(),
        ));
    }
    let mut history = Vec::with_capacity(cfg.epochs);
    if cfg.epochs == 0 {
        return Ok(history);
    }
    let steps_per_epoch = train_set.len().div_ceil(cfg.batch_size);
    let total_steps = steps_per_epoch * cfg.epochs;
    let cycle_len = total_steps.div_ceil(cfg.cycles);
    let schedule = net.arch().schedule;

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut optimizer = Optimizer::new(cfg.optimizer, net);
    let mut order: Vec<usize> = (0..train_set.len()).collect();
    let mut step = 0;
    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let epoch_lr = lr_at(schedule, step % cycle_len, cycle_len, cfg.lr, cfg.lr_min)?;
        let mut loss_sum = 0.0;
        for idx in order.chunks(cfg.batch_size) {
            let patches: Vec<&Image> = idx.iter().map(|&i| &train_set.patches[i]).collect();
            let (input, target) = mosaic_batch(&patches, cfg.pattern)?;
            let back = net.backward(&input, &target, cfg.l2).map_err(|e| match e {
                NetError::NonFiniteLoss => NetError::Diverged { epoch },
                other => other,
            })?;
            net.update_running_stats(&back.batch_stats);
            let lr = lr_at(schedule, step % cycle_len, cycle_len, cfg.lr, cfg.lr_min)?;
            optimizer.step(net, &back.grads, lr);
            loss_sum += back.loss;
            step += 1;
        }
        let report = evaluate_patches(net, &valid_set.patches, cfg.pattern)?;
        history.push(EpochRecord {
            epoch,
            train_loss: loss_sum / steps_per_epoch as f64,
            valid_cpsnr: report.cpsnr,
            lr: epoch_lr,
        });
    }
    Ok(history)
}
