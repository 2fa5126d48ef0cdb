use serde::{Deserialize, Serialize};

use super::arch::Schedule;
use super::network::Network;
use super::NetError;

/// Learning rate at `step` of `total_steps`.
///
/// Cosine annealing follows half a cosine from `lr_base` at step 0 down to
/// `lr_min` at `total_steps`.
pub fn lr_at(schedule: Schedule, step: usize, total_steps: usize, lr_base: f64, lr_min: f64) -> Result<f64, NetError> {
    if lr_base.is_nan() || lr_base <= 0.0 {
        return Err(NetError::InvalidConfig(format!(
            "base learning rate must be positive, got {lr_base}"
        )));
    }
    if step > total_steps {
        return Err(NetError::InvalidConfig(format!(
            "step {step} is past the schedule end {total_steps}"
        )));
    }
    Ok(match schedule {
        Schedule::Fixed => lr_base,
        Schedule::Cosine => {
            if total_steps == 0 {
                return Ok(lr_base);
            }
            let phase = std::f64::consts::PI * step as f64 / total_steps as f64;
            lr_min + 0.5 * (lr_base - lr_min) * (1.0 + phase.cos())
        }
    })
}

/// `p <- p - lr * g` on every trainable parameter.
pub fn sgd_step(net: &mut Network, grads: &[f64], lr: f64) {
    assert_eq!(grads.len(), net.params().len(), "gradient store size");
    let trainable = trainable_mask(net);
    for ((p, g), t) in net.params_mut().iter_mut().zip(grads).zip(trainable) {
        if t {
            *p -= lr * g;
        }
    }
}

fn trainable_mask(net: &Network) -> Vec<bool> {
    let mut mask = vec![false; net.params().len()];
    for seg in net.segments() {
        if seg.kind.is_trainable() {
            mask[seg.range.clone()].fill(true);
        }
    }
    mask
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OptimizerKind {
    Sgd,
    Adam,
}

impl std::str::FromStr for OptimizerKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "sgd" => Ok(OptimizerKind::Sgd),
            "adam" => Ok(OptimizerKind::Adam),
            _ => Err(format!("unknown optimizer `{s}` (expected sgd or adam)")),
        }
    }
}

/// Optimiser state for one network.
#[derive(Debug, Clone)]
pub enum Optimizer {
    Sgd,
    Adam {
        beta1: f64,
        beta2: f64,
        eps: f64,
        t: u64,
        m: Vec<f64>,
        v: Vec<f64>,
        trainable: Vec<bool>,
    },
}

impl Optimizer {
    pub fn new(kind: OptimizerKind, net: &Network) -> Self {
        match kind {
            OptimizerKind::Sgd => Optimizer::Sgd,
            OptimizerKind::Adam => Optimizer::Adam {
                beta1: 0.9,
                beta2: 0.999,
                eps: 1e-8,
                t: 0,
                m: vec![0.0; net.params().len()],
                v: vec![0.0; net.params().len()],
                trainable: trainable_mask(net),
            },
        }
    }

    pub fn step(&mut self, net: &mut Network, grads: &[f64], lr: f64) {
        match self {
            Optimizer::Sgd => sgd_step(net, grads, lr),
            Optimizer::Adam {
                beta1,
                beta2,
                eps,
                t,
                m,
                v,
                trainable,
            } => {
                *t += 1;
                let c1 = 1.0 - beta1.powi(*t as i32);
                let c2 = 1.0 - beta2.powi(*t as i32);
                for (i, p) in net.params_mut().iter_mut().enumerate() {
                    if !trainable[i] {
                        continue;
                    }
                    let g = grads[i];
                    m[i] = *beta1 * m[i] + (1.0 - *beta1) * g;
                    v[i] = *beta2 * v[i] + (1.0 - *beta2) * g * g;
                    *p -= lr * (m[i] / c1) / ((v[i] / c2).sqrt() + *eps);
                }
            }
        }
    }
}
