use std::ops::Range;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::exec::Exec;

use super::arch::{ArchDescriptor, ConvKind, KERNEL};
use super::ops::{self, BatchStats, BN_MOMENTUM};
use super::tensor::Tensor;
use super::NetError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SegmentKind {
    ConvWeight,
    ConvBias,
    BnGamma,
    BnBeta,
    BnRunningMean,
    BnRunningVar,
}

impl SegmentKind {
    /// Updated by the optimiser (running statistics are not).
    pub fn is_trainable(self) -> bool {
        !matches!(self, SegmentKind::BnRunningMean | SegmentKind::BnRunningVar)
    }
}

/// A named contiguous slice of the flat parameter store.
#[derive(Debug, Clone, PartialEq)]
pub struct Segment {
    pub name: String,
    pub kind: SegmentKind,
    pub range: Range<usize>,
    /// He fan-in for weights; unused otherwise.
    pub fan_in: usize,
}

#[derive(Debug, Clone)]
enum ConvLayer {
    Standard {
        weight: usize,
        bias: usize,
        cout: usize,
        k: usize,
    },
    Separable {
        depth_weight: usize,
        depth_bias: usize,
        point_weight: usize,
        point_bias: usize,
        channels: usize,
    },
}

#[derive(Debug, Clone)]
struct Block {
    conv: ConvLayer,
    gamma: usize,
    beta: usize,
    running_mean: usize,
    running_var: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Eval,
}

/// A built network: architecture, flat parameter store and layout.
#[derive(Debug, Clone)]
pub struct Network {
    arch: ArchDescriptor,
    seed: u64,
    params: Vec<f64>,
    segments: Vec<Segment>,
    blocks: Vec<Block>,
    head: ConvLayer,
    exec: Exec,
}

struct LayoutBuilder {
    segments: Vec<Segment>,
    len: usize,
}

impl LayoutBuilder {
    fn push(&mut self, name: String, kind: SegmentKind, len: usize, fan_in: usize) -> usize {
        let idx = self.segments.len();
        self.segments.push(Segment {
            name,
            kind,
            range: self.len..self.len + len,
            fan_in,
        });
        self.len += len;
        idx
    }

    fn standard(&mut self, prefix: &str, cin: usize, cout: usize, k: usize) -> ConvLayer {
        ConvLayer::Standard {
            weight: self.push(
                format!("{prefix}.weight"),
                SegmentKind::ConvWeight,
                cout * cin * k * k,
                cin * k * k,
            ),
            bias: self.push(format!("{prefix}.bias"), SegmentKind::ConvBias, cout, 0),
            cout,
            k,
        }
    }

    fn separable(&mut self, prefix: &str, channels: usize) -> ConvLayer {
        ConvLayer::Separable {
            depth_weight: self.push(
                format!("{prefix}.depthwise.weight"),
                SegmentKind::ConvWeight,
                channels * 9,
                9,
            ),
            depth_bias: self.push(format!("{prefix}.depthwise.bias"), SegmentKind::ConvBias, channels, 0),
            point_weight: self.push(
                format!("{prefix}.pointwise.weight"),
                SegmentKind::ConvWeight,
                channels * channels,
                channels,
            ),
            point_bias: self.push(format!("{prefix}.pointwise.bias"), SegmentKind::ConvBias, channels, 0),
            channels,
        }
    }
}

/// Per-block values the backward pass needs.
struct BlockCache {
    input: Tensor,
    depthwise_out: Option<Tensor>,
    xhat: Tensor,
    inv_std: Vec<f64>,
    pre_activation: Tensor,
    stats: BatchStats,
}

struct ForwardCache {
    blocks: Vec<BlockCache>,
    head_input: Tensor,
}

/// Result of [`Network::backward`].
#[derive(Debug, Clone)]
pub struct Backward {
    /// Objective: data MSE plus the L2 penalty.
    pub loss: f64,
    pub data_loss: f64,
    /// Gradient for every stored parameter, zero for running statistics.
    pub grads: Vec<f64>,
    /// Batch statistics per block, to fold into the running estimates.
    pub batch_stats: Vec<BatchStats>,
}

impl Network {
    /// Builds the network with He fan-in normal weights drawn from a ChaCha8
    /// stream seeded by `seed`, zero biases, BN gamma 1 / beta 0, running
    /// statistics (0, 1).
    pub fn build(arch: ArchDescriptor, seed: u64) -> Result<Network, NetError> {
        arch.validate()?;
        let f = arch.filters;
        let mut layout = LayoutBuilder {
            segments: Vec::new(),
            len: 0,
        };
        let mut blocks = Vec::with_capacity(arch.blocks);
        for b in 0..arch.blocks {
            let prefix = format!("block{b}");
            let conv = if b == 0 {
                layout.standard(&format!("{prefix}.conv"), 3, f, KERNEL)
            } else {
                match arch.conv_kind {
                    ConvKind::Standard => layout.standard(&format!("{prefix}.conv"), f, f, KERNEL),
                    ConvKind::Separable => layout.separable(&format!("{prefix}.conv"), f),
                }
            };
            blocks.push(Block {
                conv,
                gamma: layout.push(format!("{prefix}.bn.gamma"), SegmentKind::BnGamma, f, 0),
                beta: layout.push(format!("{prefix}.bn.beta"), SegmentKind::BnBeta, f, 0),
                running_mean: layout.push(format!("{prefix}.bn.running_mean"), SegmentKind::BnRunningMean, f, 0),
                running_var: layout.push(format!("{prefix}.bn.running_var"), SegmentKind::BnRunningVar, f, 0),
            });
        }
        let head = layout.standard("head", f, 3, KERNEL);

        let mut params = vec![0.0; layout.len];
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for seg in &layout.segments {
            let slot = &mut params[seg.range.clone()];
            match seg.kind {
                SegmentKind::ConvWeight => {
                    let normal =
                        Normal::new(0.0, (2.0 / seg.fan_in as f64).sqrt()).expect("positive standard deviation");
                    for v in slot {
                        *v = normal.sample(&mut rng);
                    }
                }
                SegmentKind::BnGamma | SegmentKind::BnRunningVar => slot.fill(1.0),
                SegmentKind::ConvBias | SegmentKind::BnBeta | SegmentKind::BnRunningMean => {}
            }
        }
        Ok(Network {
            arch,
            seed,
            params,
            segments: layout.segments,
            blocks,
            head,
            exec: Exec::default(),
        })
    }

    /// Rebuilds the layout for `arch` and installs `params` (checkpoint load).
    pub fn from_params(arch: ArchDescriptor, seed: u64, params: Vec<f64>) -> Result<Network, NetError> {
        let mut net = Network::build(arch, seed)?;
        if params.len() != net.params.len() {
            return Err(NetError::ArchMismatch {
                expected: net.params.len(),
                found: params.len(),
            });
        }
        net.params = params;
        Ok(net)
    }

    pub fn arch(&self) -> &ArchDescriptor {
        &self.arch
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn exec(&self) -> Exec {
        self.exec
    }

    pub fn set_exec(&mut self, exec: Exec) {
        self.exec = exec;
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    pub fn segment(&self, name: &str) -> Option<&Segment> {
        self.segments.iter().find(|s| s.name == name)
    }

    /// Structural walk: the summed length of every stored tensor.
    pub fn stored_param_count(&self) -> usize {
        self.segments.iter().map(|s| s.range.len()).sum()
    }

    fn seg(&self, idx: usize) -> &[f64] {
        &self.params[self.segments[idx].range.clone()]
    }

    fn check_input(&self, batch: &Tensor) -> Result<(), NetError> {
        if batch.c != 3 || batch.n == 0 || batch.h == 0 || batch.w == 0 {
            return Err(NetError::Shape(format!(
                "network input must be N x 3 x H x W with N, H, W > 0, got {:?}",
                batch.shape()
            )));
        }
        Ok(())
    }

    fn conv_forward(&self, conv: &ConvLayer, x: &Tensor) -> (Tensor, Option<Tensor>) {
        match *conv {
            ConvLayer::Standard {
                weight, bias, cout, k, ..
            } => (
                ops::conv_forward(self.exec, x, self.seg(weight), self.seg(bias), cout, k),
                None,
            ),
            ConvLayer::Separable {
                depth_weight,
                depth_bias,
                point_weight,
                point_bias,
                channels,
            } => {
                let d = ops::depthwise_forward(self.exec, x, self.seg(depth_weight), self.seg(depth_bias));
                let p = ops::conv_forward(self.exec, &d, self.seg(point_weight), self.seg(point_bias), channels, 1);
                (p, Some(d))
            }
        }
    }

    /// Forward pass. Train mode normalises with batch statistics and folds
    /// them into the running estimates (momentum 0.9); eval mode uses the
    /// running estimates and leaves the network untouched.
    pub fn forward(&mut self, batch: &Tensor, mode: Mode) -> Result<Tensor, NetError> {
        match mode {
            Mode::Eval => self.infer(batch),
            Mode::Train => {
                self.check_input(batch)?;
                let (out, cache) = self.forward_train(batch);
                let stats: Vec<BatchStats> = cache.blocks.into_iter().map(|b| b.stats).collect();
                self.update_running_stats(&stats);
                Ok(out)
            }
        }
    }

    /// Eval-mode forward; read-only, safe to share across threads.
    pub fn infer(&self, batch: &Tensor) -> Result<Tensor, NetError> {
        self.check_input(batch)?;
        let groups = self.arch.skip_groups();
        let mut h = batch.clone();
        let mut group_input: Option<Tensor> = None;
        for (b, block) in self.blocks.iter().enumerate() {
            if groups.iter().any(|g| g.0 == b) {
                group_input = Some(h.clone());
            }
            let (z, _) = self.conv_forward(&block.conv, &h);
            let y = ops::batch_norm_eval(
                self.exec,
                &z,
                self.seg(block.gamma),
                self.seg(block.beta),
                self.seg(block.running_mean),
                self.seg(block.running_var),
            );
            let mut a = ops::selu_forward(self.exec, &y);
            if groups.iter().any(|g| g.1 == b + 1) {
                add_assign(&mut a, group_input.as_ref().expect("group opened before it closes"));
            }
            h = a;
        }
        Ok(self.conv_forward(&self.head, &h).0)
    }

    fn forward_train(&self, batch: &Tensor) -> (Tensor, ForwardCache) {
        let groups = self.arch.skip_groups();
        let mut h = batch.clone();
        let mut group_input: Option<Tensor> = None;
        let mut caches = Vec::with_capacity(self.blocks.len());
        for (b, block) in self.blocks.iter().enumerate() {
            if groups.iter().any(|g| g.0 == b) {
                group_input = Some(h.clone());
            }
            let (z, depthwise_out) = self.conv_forward(&block.conv, &h);
            let bn = ops::batch_norm_train(self.exec, &z, self.seg(block.gamma), self.seg(block.beta));
            let mut a = ops::selu_forward(self.exec, &bn.out);
            if groups.iter().any(|g| g.1 == b + 1) {
                add_assign(&mut a, group_input.as_ref().expect("group opened before it closes"));
            }
            caches.push(BlockCache {
                input: std::mem::replace(&mut h, a),
                depthwise_out,
                xhat: bn.xhat,
                inv_std: bn.inv_std,
                pre_activation: bn.out,
                stats: bn.stats,
            });
        }
        let out = self.conv_forward(&self.head, &h).0;
        (
            out,
            ForwardCache {
                blocks: caches,
                head_input: h,
            },
        )
    }

    pub fn update_running_stats(&mut self, stats: &[BatchStats]) {
        let slots: Vec<(usize, usize)> = self.blocks.iter().map(|b| (b.running_mean, b.running_var)).collect();
        for ((running_mean, running_var), s) in slots.into_iter().zip(stats) {
            let unbias = if s.count > 1 {
                s.count as f64 / (s.count - 1) as f64
            } else {
                1.0
            };
            let rm = self.segments[running_mean].range.clone();
            for (v, m) in self.params[rm].iter_mut().zip(&s.mean) {
                *v = BN_MOMENTUM * *v + (1.0 - BN_MOMENTUM) * m;
            }
            let rv = self.segments[running_var].range.clone();
            for (v, var) in self.params[rv].iter_mut().zip(&s.var) {
                *v = BN_MOMENTUM * *v + (1.0 - BN_MOMENTUM) * var * unbias;
            }
        }
    }

    /// Sum of squared convolution weights (biases and BN parameters excluded).
    pub fn weight_sq_norm(&self) -> f64 {
        self.segments
            .iter()
            .filter(|s| s.kind == SegmentKind::ConvWeight)
            .map(|s| self.params[s.range.clone()].iter().map(|w| w * w).sum::<f64>())
            .sum()
    }

    /// Train-mode forward plus backpropagation of
    /// `mean((out - target)^2) + l2 * sum(conv weights^2)`.
    /// Does not modify the network.
    pub fn backward(&self, batch: &Tensor, target: &Tensor, l2: f64) -> Result<Backward, NetError> {
        self.check_input(batch)?;
        if target.shape() != batch.shape() {
            return Err(NetError::Shape(format!(
                "target {:?} does not match batch {:?}",
                target.shape(),
                batch.shape()
            )));
        }
        let (out, cache) = self.forward_train(batch);
        let count = out.data.len() as f64;
        let mut data_loss = 0.0;
        let mut grad = out.zeros_like();
        for ((g, o), t) in grad.data.iter_mut().zip(&out.data).zip(&target.data) {
            let d = o - t;
            data_loss += d * d;
            *g = 2.0 * d / count;
        }
        data_loss /= count;
        let loss = data_loss + l2 * self.weight_sq_norm();
        if !loss.is_finite() {
            return Err(NetError::NonFiniteLoss);
        }

        let mut grads = vec![0.0; self.params.len()];
        let mut g = self.conv_backward(&self.head, &cache.head_input, None, &grad, &mut grads);

        let groups = self.arch.skip_groups();
        let mut pending_skip: Option<Tensor> = None;
        for (b, block) in self.blocks.iter().enumerate().rev() {
            let bc = &cache.blocks[b];
            if groups.iter().any(|gr| gr.1 == b + 1) {
                pending_skip = Some(g.clone());
            }
            ops::selu_backward(self.exec, &mut g, &bc.pre_activation);
            let bn = ops::batch_norm_backward(self.exec, &g, &bc.xhat, &bc.inv_std, self.seg(block.gamma));
            self.write_grad(&mut grads, block.gamma, &bn.gamma);
            self.write_grad(&mut grads, block.beta, &bn.beta);
            g = self.conv_backward(&block.conv, &bc.input, bc.depthwise_out.as_ref(), &bn.input, &mut grads);
            if groups.iter().any(|gr| gr.0 == b) {
                add_assign(&mut g, &pending_skip.take().expect("group closed before it opens"));
            }
        }

        if l2 != 0.0 {
            for seg in self.segments.iter().filter(|s| s.kind == SegmentKind::ConvWeight) {
                for i in seg.range.clone() {
                    grads[i] += 2.0 * l2 * self.params[i];
                }
            }
        }
        Ok(Backward {
            loss,
            data_loss,
            grads,
            batch_stats: cache.blocks.into_iter().map(|b| b.stats).collect(),
        })
    }

    fn write_grad(&self, grads: &mut [f64], seg: usize, values: &[f64]) {
        grads[self.segments[seg].range.clone()].copy_from_slice(values);
    }

    fn conv_backward(
        &self,
        conv: &ConvLayer,
        input: &Tensor,
        depthwise_out: Option<&Tensor>,
        grad_out: &Tensor,
        grads: &mut [f64],
    ) -> Tensor {
        match *conv {
            ConvLayer::Standard { weight, bias, k, .. } => {
                let cg = ops::conv_backward(self.exec, input, self.seg(weight), grad_out, k);
                self.write_grad(grads, weight, &cg.weight);
                self.write_grad(grads, bias, &cg.bias);
                cg.input
            }
            ConvLayer::Separable {
                depth_weight,
                depth_bias,
                point_weight,
                point_bias,
                ..
            } => {
                let d = depthwise_out.expect("separable layers cache their depthwise output");
                let pg = ops::conv_backward(self.exec, d, self.seg(point_weight), grad_out, 1);
                self.write_grad(grads, point_weight, &pg.weight);
                self.write_grad(grads, point_bias, &pg.bias);
                let dg = ops::depthwise_backward(self.exec, input, self.seg(depth_weight), &pg.input);
                self.write_grad(grads, depth_weight, &dg.weight);
                self.write_grad(grads, depth_bias, &dg.bias);
                dg.input
            }
        }
    }
}

fn add_assign(dst: &mut Tensor, src: &Tensor) {
    debug_assert_eq!(dst.shape(), src.shape());
    for (d, s) in dst.data.iter_mut().zip(&src.data) {
        *d += s;
    }
}
