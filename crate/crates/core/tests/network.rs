use demosaic_nas::exec::Exec;
use demosaic_nas::neuralnet::{count_params, ArchDescriptor, ConvKind, Mode, Network, Schedule, SegmentKind, Tensor};
use demosaic_nas::search::enumerate_space;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_tensor(rng: &mut ChaCha8Rng, shape: [usize; 4]) -> Tensor {
    let len = shape.iter().product();
    let data = (0..len).map(|_| rng.random::<f64>()).collect();
    Tensor::from_vec(shape[0], shape[1], shape[2], shape[3], data).unwrap()
}

/// Objective computed only from a train-mode forward pass.
fn objective(net: &Network, batch: &Tensor, target: &Tensor, l2: f64) -> f64 {
    let mut probe = net.clone();
    let out = probe.forward(batch, Mode::Train).unwrap();
    let mse = out
        .data
        .iter()
        .zip(&target.data)
        .map(|(o, t)| (o - t) * (o - t))
        .sum::<f64>()
        / out.data.len() as f64;
    let decay: f64 = net
        .segments()
        .iter()
        .filter(|s| s.kind == SegmentKind::ConvWeight)
        .flat_map(|s| net.params()[s.range.clone()].iter())
        .map(|w| w * w)
        .sum();
    mse + l2 * decay
}

/// Compares every analytic gradient component against central differences.
fn gradient_check(arch: ArchDescriptor, seed: u64, l2: f64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut net = Network::build(arch, seed).unwrap();
    // Nonzero biases and BN affine parameters exercise every path.
    for seg in net.segments().to_vec() {
        if matches!(
            seg.kind,
            SegmentKind::ConvBias | SegmentKind::BnBeta | SegmentKind::BnGamma
        ) {
            for i in seg.range.clone() {
                net.params_mut()[i] += rng.random_range(-0.3..0.3);
            }
        }
    }
    let batch = random_tensor(&mut rng, [2, 3, 8, 8]);
    let target = random_tensor(&mut rng, [2, 3, 8, 8]);
    let back = net.backward(&batch, &target, l2).unwrap();
    assert!((back.loss - objective(&net, &batch, &target, l2)).abs() <= 1e-14 * back.loss.abs().max(1.0));

    let h = 1e-5;
    let mut worst = 0.0f64;
    for seg in net.segments().to_vec() {
        for i in seg.range.clone() {
            let original = net.params()[i];
            net.params_mut()[i] = original + h;
            let up = objective(&net, &batch, &target, l2);
            net.params_mut()[i] = original - h;
            let down = objective(&net, &batch, &target, l2);
            net.params_mut()[i] = original;
            let numeric = (up - down) / (2.0 * h);
            let analytic = back.grads[i];
            if !seg.kind.is_trainable() {
                assert_eq!(analytic, 0.0, "{} has a gradient", seg.name);
                continue;
            }
            // Batch norm subtracts the channel mean, so biases feeding it have
            // an exactly zero gradient; the difference quotient is pure noise.
            if seg.kind == SegmentKind::ConvBias && seg.name.starts_with("block") {
                assert!(analytic.abs() <= 1e-12, "{} = {analytic:e}", seg.name);
                assert!(numeric.abs() <= 1e-8, "{} numeric {numeric:e}", seg.name);
                continue;
            }
            let scale = analytic.abs().max(numeric.abs()).max(1e-6);
            let rel = (analytic - numeric).abs() / scale;
            worst = worst.max(rel);
            assert!(
                rel <= 1e-4,
                "{arch} {}[{}]: analytic {analytic:e} numeric {numeric:e} rel {rel:e}",
                seg.name,
                i - seg.range.start
            );
        }
    }
    eprintln!("{arch}: worst relative gradient error {worst:e}");
}

#[test]
fn gradients_standard_with_skips() {
    gradient_check(
        ArchDescriptor::new(4, 3, ConvKind::Standard, 1, Schedule::Fixed),
        11,
        1e-3,
    );
}

#[test]
fn gradients_standard_without_skips() {
    gradient_check(
        ArchDescriptor::new(4, 3, ConvKind::Standard, 3, Schedule::Fixed),
        12,
        0.0,
    );
}

#[test]
fn gradients_separable_with_skips() {
    gradient_check(
        ArchDescriptor::new(4, 3, ConvKind::Separable, 1, Schedule::Fixed),
        13,
        1e-3,
    );
}

#[test]
fn gradients_separable_without_skips() {
    gradient_check(
        ArchDescriptor::new(4, 3, ConvKind::Separable, 5, Schedule::Cosine),
        14,
        0.0,
    );
}

#[test]
fn gradients_separable_skip_two_with_partial_group() {
    gradient_check(
        ArchDescriptor::new(3, 4, ConvKind::Separable, 2, Schedule::Fixed),
        15,
        1e-2,
    );
}

#[test]
fn param_count_matches_structural_walk_for_whole_space() {
    let space = enumerate_space();
    assert_eq!(space.len(), 120);
    for arch in space {
        let net = Network::build(arch, 0).unwrap();
        assert_eq!(count_params(&arch), net.stored_param_count(), "{arch}");
        assert_eq!(net.params().len(), net.stored_param_count());
    }
    let deep = ArchDescriptor::new(64, 20, ConvKind::Standard, 20, Schedule::Fixed);
    assert_eq!(Network::build(deep, 0).unwrap().stored_param_count(), 710275);
}

#[test]
fn builds_are_deterministic() {
    let arch = ArchDescriptor::new(16, 5, ConvKind::Separable, 2, Schedule::Fixed);
    let a = Network::build(arch, 42).unwrap();
    let b = Network::build(arch, 42).unwrap();
    assert_eq!(
        a.params().iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
        b.params().iter().map(|v| v.to_bits()).collect::<Vec<_>>()
    );
    assert_ne!(a.params(), Network::build(arch, 43).unwrap().params());
}

#[test]
fn output_keeps_spatial_dims() {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let arch = ArchDescriptor::new(16, 3, ConvKind::Standard, 1, Schedule::Fixed);
    let net = Network::build(arch, 0).unwrap();
    let x = random_tensor(&mut rng, [1, 3, 32, 32]);
    assert_eq!(net.infer(&x).unwrap().shape(), [1, 3, 32, 32]);
    for kind in [ConvKind::Standard, ConvKind::Separable] {
        for skip in [1, 2] {
            let net = Network::build(ArchDescriptor::new(4, 5, kind, skip, Schedule::Fixed), 1).unwrap();
            let x = random_tensor(&mut rng, [2, 3, 7, 11]);
            assert_eq!(net.infer(&x).unwrap().shape(), [2, 3, 7, 11]);
        }
    }
    assert!(net.infer(&random_tensor(&mut rng, [1, 4, 8, 8])).is_err());
}

#[test]
fn zeroed_head_outputs_its_bias() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let arch = ArchDescriptor::new(4, 3, ConvKind::Separable, 1, Schedule::Fixed);
    let mut net = Network::build(arch, 0).unwrap();
    let w = net.segment("head.weight").unwrap().range.clone();
    let b = net.segment("head.bias").unwrap().range.clone();
    net.params_mut()[w].fill(0.0);
    net.params_mut()[b.clone()].copy_from_slice(&[0.25, -0.5, 0.75]);
    for _ in 0..3 {
        let out = net.infer(&random_tensor(&mut rng, [2, 3, 5, 6])).unwrap();
        for n in 0..2 {
            for (c, want) in [0.25, -0.5, 0.75].iter().enumerate() {
                assert!(out.plane(n, c).iter().all(|v| v == want));
            }
        }
    }
}

#[test]
fn eval_is_pure_and_train_updates_running_stats() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let arch = ArchDescriptor::new(4, 3, ConvKind::Standard, 1, Schedule::Fixed);
    let mut net = Network::build(arch, 0).unwrap();
    let x = random_tensor(&mut rng, [2, 3, 8, 8]);
    let before = net.params().to_vec();
    let a = net.forward(&x, Mode::Eval).unwrap();
    let b = net.forward(&x, Mode::Eval).unwrap();
    assert_eq!(a, b);
    assert_eq!(net.params(), &before[..]);
    net.forward(&x, Mode::Train).unwrap();
    let rm = net.segment("block0.bn.running_mean").unwrap().range.clone();
    assert!(net.params()[rm].iter().any(|&v| v != 0.0));
}

#[test]
fn perfect_target_has_zero_loss_and_gradient() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let arch = ArchDescriptor::new(4, 3, ConvKind::Separable, 2, Schedule::Fixed);
    let net = Network::build(arch, 3).unwrap();
    let x = random_tensor(&mut rng, [2, 3, 8, 8]);
    let target = net.clone().forward(&x, Mode::Train).unwrap();
    let back = net.backward(&x, &target, 0.0).unwrap();
    assert_eq!(back.loss, 0.0);
    assert!(back.grads.iter().all(|&g| g == 0.0));
}

#[test]
fn weight_decay_term_is_linear() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let arch = ArchDescriptor::new(4, 3, ConvKind::Standard, 1, Schedule::Fixed);
    let net = Network::build(arch, 3).unwrap();
    let x = random_tensor(&mut rng, [2, 3, 8, 8]);
    let t = random_tensor(&mut rng, [2, 3, 8, 8]);
    let l2 = 1e-3;
    let one = net.backward(&x, &t, l2).unwrap();
    let two = net.backward(&x, &t, 2.0 * l2).unwrap();
    let norm = net.weight_sq_norm();
    assert!(((two.loss - one.loss) - l2 * norm).abs() <= 1e-15 * two.loss);
    assert_eq!(one.data_loss, two.data_loss);
}

#[test]
fn backward_rejects_mismatched_target() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let net = Network::build(ArchDescriptor::new(4, 2, ConvKind::Standard, 1, Schedule::Fixed), 0).unwrap();
    let x = random_tensor(&mut rng, [2, 3, 8, 8]);
    let t = random_tensor(&mut rng, [2, 3, 8, 7]);
    assert!(net.backward(&x, &t, 0.0).is_err());
}

#[test]
fn sequential_and_parallel_training_steps_agree() {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let arch = ArchDescriptor::new(8, 3, ConvKind::Separable, 1, Schedule::Fixed);
    let mut seq = Network::build(arch, 1).unwrap();
    seq.set_exec(Exec::Sequential);
    let mut par = seq.clone();
    par.set_exec(Exec::Parallel);
    let x = random_tensor(&mut rng, [3, 3, 16, 16]);
    let t = random_tensor(&mut rng, [3, 3, 16, 16]);
    let a = seq.backward(&x, &t, 1e-8).unwrap();
    let b = par.backward(&x, &t, 1e-8).unwrap();
    assert_eq!(a.loss.to_bits(), b.loss.to_bits());
    assert_eq!(a.grads, b.grads);
    assert_eq!(seq.infer(&x).unwrap(), par.infer(&x).unwrap());
}
