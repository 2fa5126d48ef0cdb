//! Layer kernels: same-padded convolution (dense and depthwise), batch
//! normalisation and SELU, each with its backward pass.
//!
//! Parallel kernels split work by output plane or by channel; every chunk is
//! reduced in a fixed sequential order, so results do not depend on [`Exec`].

use crate::exec::Exec;

use super::tensor::Tensor;

pub const SELU_LAMBDA: f64 = 1.0507009873554805;
pub const SELU_ALPHA: f64 = 1.6732632423543772;
pub const BN_EPS: f64 = 1e-5;
pub const BN_MOMENTUM: f64 = 0.9;

/// `dst[y, x] += scale * src[y + dy, x + dx]` wherever the source is in range.
#[inline]
fn shift_acc(dst: &mut [f64], src: &[f64], h: usize, w: usize, dy: isize, dx: isize, scale: f64) {
    let y0 = (-dy).max(0) as usize;
    let y1 = (h as isize - dy).min(h as isize).max(0) as usize;
    let x0 = (-dx).max(0) as usize;
    let x1 = (w as isize - dx).min(w as isize).max(0) as usize;
    if x0 >= x1 {
        return;
    }
    for y in y0..y1 {
        let sy = (y as isize + dy) as usize;
        let d = &mut dst[y * w + x0..y * w + x1];
        let s = &src[sy * w + (x0 as isize + dx) as usize..sy * w + (x1 as isize + dx) as usize];
        for (a, b) in d.iter_mut().zip(s) {
            *a += scale * b;
        }
    }
}

/// `sum over (y, x) of a[y, x] * b[y + dy, x + dx]` where `b` is in range.
#[inline]
fn shift_dot(a: &[f64], b: &[f64], h: usize, w: usize, dy: isize, dx: isize) -> f64 {
    let y0 = (-dy).max(0) as usize;
    let y1 = (h as isize - dy).min(h as isize).max(0) as usize;
    let x0 = (-dx).max(0) as usize;
    let x1 = (w as isize - dx).min(w as isize).max(0) as usize;
    if x0 >= x1 {
        return 0.0;
    }
    let mut total = 0.0;
    for y in y0..y1 {
        let sy = (y as isize + dy) as usize;
        let ra = &a[y * w + x0..y * w + x1];
        let rb = &b[sy * w + (x0 as isize + dx) as usize..sy * w + (x1 as isize + dx) as usize];
        total += ra.iter().zip(rb).map(|(p, q)| p * q).sum::<f64>();
    }
    total
}

/// Dense convolution, weights `[cout][cin][k][k]`, zero "same" padding.
pub fn conv_forward(exec: Exec, input: &Tensor, weight: &[f64], bias: &[f64], cout: usize, k: usize) -> Tensor {
    let (n, cin, h, w) = (input.n, input.c, input.h, input.w);
    debug_assert_eq!(weight.len(), cout * cin * k * k);
    let pad = (k / 2) as isize;
    let mut out = Tensor::zeros(n, cout, h, w);
    exec.for_each_chunk_mut(&mut out.data, h * w, |idx, dst| {
        let (b, co) = (idx / cout, idx % cout);
        dst.fill(bias[co]);
        for ci in 0..cin {
            let src = input.plane(b, ci);
            let wk = &weight[(co * cin + ci) * k * k..(co * cin + ci + 1) * k * k];
            for ky in 0..k {
                for kx in 0..k {
                    let dy = ky as isize - pad;
                    let dx = kx as isize - pad;
                    shift_acc(dst, src, h, w, dy, dx, wk[ky * k + kx]);
                }
            }
        }
    });
    out
}

pub struct ConvGrads {
    pub input: Tensor,
    pub weight: Vec<f64>,
    pub bias: Vec<f64>,
}

pub fn conv_backward(exec: Exec, input: &Tensor, weight: &[f64], grad_out: &Tensor, k: usize) -> ConvGrads {
    let (n, cin, h, w) = (input.n, input.c, input.h, input.w);
    let cout = grad_out.c;
    let pad = (k / 2) as isize;
    let kk = k * k;

    let per_out: Vec<(Vec<f64>, f64)> = exec.map_range(cout, |co| {
        let mut gw = vec![0.0; cin * kk];
        let mut gb = 0.0;
        for b in 0..n {
            let g = grad_out.plane(b, co);
            gb += g.iter().sum::<f64>();
            for ci in 0..cin {
                let src = input.plane(b, ci);
                for ky in 0..k {
                    for kx in 0..k {
                        gw[ci * kk + ky * k + kx] += shift_dot(g, src, h, w, ky as isize - pad, kx as isize - pad);
                    }
                }
            }
        }
        (gw, gb)
    });
    let mut gweight = Vec::with_capacity(cout * cin * kk);
    let mut gbias = Vec::with_capacity(cout);
    for (gw, gb) in per_out {
        gweight.extend(gw);
        gbias.push(gb);
    }

    let mut gin = input.zeros_like();
    exec.for_each_chunk_mut(&mut gin.data, h * w, |idx, dst| {
        let (b, ci) = (idx / cin, idx % cin);
        for co in 0..cout {
            let g = grad_out.plane(b, co);
            let wk = &weight[(co * cin + ci) * kk..(co * cin + ci + 1) * kk];
            for ky in 0..k {
                for kx in 0..k {
                    let dy = ky as isize - pad;
                    let dx = kx as isize - pad;
                    shift_acc(dst, g, h, w, -dy, -dx, wk[ky * k + kx]);
                }
            }
        }
    });
    ConvGrads {
        input: gin,
        weight: gweight,
        bias: gbias,
    }
}

/// Per-channel 3x3 convolution, weights `[c][3][3]`.
pub fn depthwise_forward(exec: Exec, input: &Tensor, weight: &[f64], bias: &[f64]) -> Tensor {
    let (c, h, w) = (input.c, input.h, input.w);
    let mut out = input.zeros_like();
    exec.for_each_chunk_mut(&mut out.data, h * w, |idx, dst| {
        let ch = idx % c;
        dst.fill(bias[ch]);
        let src = &input.data[idx * h * w..(idx + 1) * h * w];
        for ky in 0..3 {
            for kx in 0..3 {
                shift_acc(
                    dst,
                    src,
                    h,
                    w,
                    ky as isize - 1,
                    kx as isize - 1,
                    weight[ch * 9 + ky * 3 + kx],
                );
            }
        }
    });
    out
}

pub fn depthwise_backward(exec: Exec, input: &Tensor, weight: &[f64], grad_out: &Tensor) -> ConvGrads {
    let (n, c, h, w) = (input.n, input.c, input.h, input.w);
    let per_channel: Vec<(Vec<f64>, f64)> = exec.map_range(c, |ch| {
        let mut gw = vec![0.0; 9];
        let mut gb = 0.0;
        for b in 0..n {
            let g = grad_out.plane(b, ch);
            let src = input.plane(b, ch);
            gb += g.iter().sum::<f64>();
            for ky in 0..3 {
                for kx in 0..3 {
                    gw[ky * 3 + kx] += shift_dot(g, src, h, w, ky as isize - 1, kx as isize - 1);
                }
            }
        }
        (gw, gb)
    });
    let mut gweight = Vec::with_capacity(c * 9);
    let mut gbias = Vec::with_capacity(c);
    for (gw, gb) in per_channel {
        gweight.extend(gw);
        gbias.push(gb);
    }
    let mut gin = input.zeros_like();
    exec.for_each_chunk_mut(&mut gin.data, h * w, |idx, dst| {
        let ch = idx % c;
        let g = &grad_out.data[idx * h * w..(idx + 1) * h * w];
        for ky in 0..3 {
            for kx in 0..3 {
                shift_acc(
                    dst,
                    g,
                    h,
                    w,
                    1 - ky as isize,
                    1 - kx as isize,
                    weight[ch * 9 + ky * 3 + kx],
                );
            }
        }
    });
    ConvGrads {
        input: gin,
        weight: gweight,
        bias: gbias,
    }
}

/// Batch statistics of one normalisation layer: per-channel mean and biased
/// variance over `N x H x W`.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchStats {
    pub mean: Vec<f64>,
    pub var: Vec<f64>,
    /// Elements per channel.
    pub count: usize,
}

pub struct BnTrainOutput {
    pub out: Tensor,
    pub xhat: Tensor,
    pub inv_std: Vec<f64>,
    pub stats: BatchStats,
}

pub fn batch_norm_train(exec: Exec, x: &Tensor, gamma: &[f64], beta: &[f64]) -> BnTrainOutput {
    let (n, c) = (x.n, x.c);
    let count = n * x.plane_len();
    let moments: Vec<(f64, f64)> = exec.map_range(c, |ch| {
        let mean = (0..n).map(|b| x.plane(b, ch).iter().sum::<f64>()).sum::<f64>() / count as f64;
        let var = (0..n)
            .map(|b| x.plane(b, ch).iter().map(|v| (v - mean) * (v - mean)).sum::<f64>())
            .sum::<f64>()
            / count as f64;
        (mean, var)
    });
    let mean: Vec<f64> = moments.iter().map(|m| m.0).collect();
    let var: Vec<f64> = moments.iter().map(|m| m.1).collect();
    let inv_std: Vec<f64> = var.iter().map(|v| 1.0 / (v + BN_EPS).sqrt()).collect();
    let mut xhat = x.zeros_like();
    let plane = x.plane_len();
    exec.for_each_chunk_mut(&mut xhat.data, plane, |idx, dst| {
        let ch = idx % c;
        let src = &x.data[idx * plane..(idx + 1) * plane];
        for (d, s) in dst.iter_mut().zip(src) {
            *d = (s - mean[ch]) * inv_std[ch];
        }
    });
    let out = affine_channels(exec, &xhat, gamma, beta);
    BnTrainOutput {
        out,
        xhat,
        inv_std,
        stats: BatchStats { mean, var, count },
    }
}

pub fn batch_norm_eval(
    exec: Exec,
    x: &Tensor,
    gamma: &[f64],
    beta: &[f64],
    running_mean: &[f64],
    running_var: &[f64],
) -> Tensor {
    let c = x.c;
    let plane = x.plane_len();
    let mut out = x.zeros_like();
    exec.for_each_chunk_mut(&mut out.data, plane, |idx, dst| {
        let ch = idx % c;
        let scale = gamma[ch] / (running_var[ch] + BN_EPS).sqrt();
        let src = &x.data[idx * plane..(idx + 1) * plane];
        for (d, s) in dst.iter_mut().zip(src) {
            *d = (s - running_mean[ch]) * scale + beta[ch];
        }
    });
    out
}

fn affine_channels(exec: Exec, x: &Tensor, scale: &[f64], shift: &[f64]) -> Tensor {
    let c = x.c;
    let plane = x.plane_len();
    let mut out = x.zeros_like();
    exec.for_each_chunk_mut(&mut out.data, plane, |idx, dst| {
        let ch = idx % c;
        let src = &x.data[idx * plane..(idx + 1) * plane];
        for (d, s) in dst.iter_mut().zip(src) {
            *d = s * scale[ch] + shift[ch];
        }
    });
    out
}

pub struct BnGrads {
    pub input: Tensor,
    pub gamma: Vec<f64>,
    pub beta: Vec<f64>,
}

pub fn batch_norm_backward(exec: Exec, grad_out: &Tensor, xhat: &Tensor, inv_std: &[f64], gamma: &[f64]) -> BnGrads {
    let (n, c) = (grad_out.n, grad_out.c);
    let plane = grad_out.plane_len();
    let m = (n * plane) as f64;
    let sums: Vec<(f64, f64)> = exec.map_range(c, |ch| {
        let mut sg = 0.0;
        let mut sgx = 0.0;
        for b in 0..n {
            let g = grad_out.plane(b, ch);
            let xh = xhat.plane(b, ch);
            sg += g.iter().sum::<f64>();
            sgx += g.iter().zip(xh).map(|(p, q)| p * q).sum::<f64>();
        }
        (sg, sgx)
    });
    let mut gin = grad_out.zeros_like();
    exec.for_each_chunk_mut(&mut gin.data, plane, |idx, dst| {
        let ch = idx % c;
        let (sg, sgx) = sums[ch];
        let k = gamma[ch] * inv_std[ch] / m;
        let g = &grad_out.data[idx * plane..(idx + 1) * plane];
        let xh = &xhat.data[idx * plane..(idx + 1) * plane];
        for ((d, gv), xv) in dst.iter_mut().zip(g).zip(xh) {
            *d = k * (m * gv - sg - xv * sgx);
        }
    });
    BnGrads {
        input: gin,
        gamma: sums.iter().map(|s| s.1).collect(),
        beta: sums.iter().map(|s| s.0).collect(),
    }
}

#[inline]
pub fn selu(x: f64) -> f64 {
    if x > 0.0 {
        SELU_LAMBDA * x
    } else {
        SELU_LAMBDA * SELU_ALPHA * x.exp_m1()
    }
}

#[inline]
pub fn selu_grad(x: f64) -> f64 {
    if x > 0.0 {
        SELU_LAMBDA
    } else {
        SELU_LAMBDA * SELU_ALPHA * x.exp()
    }
}

pub fn selu_forward(exec: Exec, x: &Tensor) -> Tensor {
    let mut out = x.clone();
    let plane = x.plane_len();
    exec.for_each_chunk_mut(&mut out.data, plane, |_, dst| {
        for v in dst {
            *v = selu(*v);
        }
    });
    out
}

/// Multiplies `grad` in place by SELU'(pre_activation).
pub fn selu_backward(exec: Exec, grad: &mut Tensor, pre_activation: &Tensor) {
    let plane = grad.plane_len();
    exec.for_each_chunk_mut(&mut grad.data, plane, |idx, dst| {
        let pre = &pre_activation.data[idx * plane..(idx + 1) * plane];
        for (g, x) in dst.iter_mut().zip(pre) {
            *g *= selu_grad(*x);
        }
    });
}
