//! Per-channel MSE, colour MSE, PSNR and the dataset-level CPSNR report.
//!
//! CPSNR over a dataset is the arithmetic mean of the per-image PSNRs, each
//! computed from that image's colour MSE. A perfect reconstruction has infinite
//! PSNR; aggregating one is an error rather than a silently capped value.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::exec::Exec;
use crate::imaging::Image;

pub use crate::imaging::ChannelId;

#[derive(Debug, Error, PartialEq)]
pub enum MetricsError {
    #[error("image dimensions differ: {0:?} vs {1:?}")]
    DimensionMismatch((usize, usize), (usize, usize)),
    #[error("{refs} reference images but {ests} estimates")]
    LengthMismatch { refs: usize, ests: usize },
    #[error("cannot score an empty image set")]
    Empty,
    #[error("image {index} is reconstructed exactly (infinite PSNR); degenerate test image")]
    InfinitePsnr { index: usize },
}

pub type Result<T, E = MetricsError> = std::result::Result<T, E>;

fn check_dims(reference: &Image, estimate: &Image) -> Result<()> {
    if reference.dims() != estimate.dims() {
        return Err(MetricsError::DimensionMismatch(reference.dims(), estimate.dims()));
    }
    Ok(())
}

pub fn mse_channel(reference: &Image, estimate: &Image, channel: ChannelId) -> Result<f64> {
    check_dims(reference, estimate)?;
    let c = channel.index();
    let sum: f64 = reference
        .data()
        .chunks_exact(3)
        .zip(estimate.data().chunks_exact(3))
        .map(|(r, e)| {
            let d = e[c] - r[c];
            d * d
        })
        .sum();
    Ok(sum / (reference.height() * reference.width()) as f64)
}

/// Colour MSE: the mean of the three per-channel MSEs.
pub fn cmse(reference: &Image, estimate: &Image) -> Result<f64> {
    let mut total = 0.0;
    for k in ChannelId::ALL {
        total += mse_channel(reference, estimate, k)?;
    }
    Ok(total / 3.0)
}

/// `10 log10(peak^2 / mse)`; `+inf` when `mse == 0`.
pub fn psnr(mse: f64, peak: f64) -> f64 {
    debug_assert!(mse >= 0.0, "negative mse {mse}");
    if mse == 0.0 {
        return f64::INFINITY;
    }
    10.0 * (peak * peak / mse).log10()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreReport {
    pub cpsnr: f64,
    pub std_error: f64,
    pub n_images: usize,
    pub per_image_psnr: Vec<f64>,
}

impl ScoreReport {
    /// Aggregates per-image PSNRs: mean, and sample-SD / sqrt(n) (0 for n = 1).
    pub fn from_psnrs(per_image_psnr: Vec<f64>) -> Result<Self> {
        let n = per_image_psnr.len();
        if n == 0 {
            return Err(MetricsError::Empty);
        }
        if let Some(index) = per_image_psnr.iter().position(|p| p.is_infinite()) {
            return Err(MetricsError::InfinitePsnr { index });
        }
        // Order-independent summation keeps reports equal under permutation.
        let mut sorted = per_image_psnr.clone();
        sorted.sort_by(f64::total_cmp);
        let mean = sorted.iter().sum::<f64>() / n as f64;
        let std_error = if n < 2 {
            0.0
        } else {
            let ss: f64 = sorted.iter().map(|p| (p - mean) * (p - mean)).sum();
            (ss / (n - 1) as f64).sqrt() / (n as f64).sqrt()
        };
        Ok(ScoreReport {
            cpsnr: mean,
            std_error,
            n_images: n,
            per_image_psnr,
        })
    }

    /// Single-line JSON with keys `cpsnr`, `std_error`, `n_images`, `per_image_psnr`.
    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("score report serializes")
    }
}

pub fn cpsnr_report(refs: &[Image], ests: &[Image]) -> Result<ScoreReport> {
    cpsnr_report_with(Exec::default(), refs, ests)
}

pub fn cpsnr_report_with(exec: Exec, refs: &[Image], ests: &[Image]) -> Result<ScoreReport> {
    if refs.len() != ests.len() {
        return Err(MetricsError::LengthMismatch {
            refs: refs.len(),
            ests: ests.len(),
        });
    }
    if refs.is_empty() {
        return Err(MetricsError::Empty);
    }
    let psnrs = exec
        .map_range(refs.len(), |i| cmse(&refs[i], &ests[i]).map(|m| psnr(m, 1.0)))
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    ScoreReport::from_psnrs(psnrs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_image(rng: &mut ChaCha8Rng, h: usize, w: usize) -> Image {
        let data = (0..h * w * 3).map(|_| rng.random::<f64>()).collect();
        Image::from_vec(h, w, data).unwrap()
    }

    // Direct double loop, written independently of the chunked implementation.
    fn naive_mse(a: &Image, b: &Image, c: usize) -> f64 {
        let mut s = 0.0;
        for i in 0..a.height() {
            for j in 0..a.width() {
                let d = b.get(i, j, c) - a.get(i, j, c);
                s += d * d;
            }
        }
        s / (a.height() * a.width()) as f64
    }

    fn rel(a: f64, b: f64) -> f64 {
        if a == b {
            0.0
        } else {
            (a - b).abs() / a.abs().max(b.abs())
        }
    }

    #[test]
    fn identical_images_have_zero_error() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let a = random_image(&mut rng, 4, 5);
        for k in ChannelId::ALL {
            assert_eq!(mse_channel(&a, &a, k).unwrap(), 0.0);
        }
        assert_eq!(cmse(&a, &a).unwrap(), 0.0);
    }

    #[test]
    fn constant_channel_error() {
        let r = Image::new(2, 2);
        for k in ChannelId::ALL {
            let e = Image::from_fn(2, 2, |_, _, c| if c == k.index() { 0.5 } else { 0.0 });
            for other in ChannelId::ALL {
                let want = if other == k { 0.25 } else { 0.0 };
                assert_eq!(mse_channel(&r, &e, other).unwrap(), want);
            }
        }
    }

    #[test]
    fn cmse_is_channel_mean() {
        let r = Image::new(10, 10);
        let e = Image::from_fn(10, 10, |_, _, c| if c == 0 { 0.03f64.sqrt() } else { 0.0 });
        assert!((cmse(&r, &e).unwrap() - 0.01).abs() < 1e-15);
    }

    #[test]
    fn matches_naive_loops() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        for _ in 0..20 {
            let a = random_image(&mut rng, 4, 4);
            let b = random_image(&mut rng, 4, 4);
            let mut mean = 0.0;
            for k in ChannelId::ALL {
                let got = mse_channel(&a, &b, k).unwrap();
                assert!(rel(got, naive_mse(&a, &b, k.index())) <= 1e-15);
                mean += got;
            }
            assert!(rel(cmse(&a, &b).unwrap(), mean / 3.0) <= 1e-15);
        }
    }

    #[test]
    fn dimension_mismatch() {
        let a = Image::new(2, 2);
        let b = Image::new(2, 3);
        assert!(matches!(cmse(&a, &b), Err(MetricsError::DimensionMismatch(..))));
    }

    #[test]
    fn psnr_values() {
        assert_eq!(psnr(1.0, 1.0), 0.0);
        for peak in [0.5, 1.0, 255.0, 1023.0] {
            assert!(psnr(peak * peak, peak).abs() < 1e-12);
        }
        assert!((psnr(1.0, 255.0) - 48.1308).abs() < 1e-3);
        assert!((psnr(1.0, 255.0) - 20.0 * 255f64.log10()).abs() < 1e-12);
        assert_eq!(psnr(0.0, 1.0), f64::INFINITY);
    }

    #[test]
    fn single_image_report() {
        let r = Image::new(4, 4);
        let e = Image::from_fn(4, 4, |_, _, _| 0.1);
        let rep = cpsnr_report(&[r], &[e]).unwrap();
        assert!((rep.cpsnr - 20.0).abs() < 1e-12);
        assert_eq!(rep.std_error, 0.0);
        assert_eq!(rep.n_images, 1);
    }

    #[test]
    fn three_psnrs() {
        let rep = ScoreReport::from_psnrs(vec![30.0, 32.0, 34.0]).unwrap();
        assert_eq!(rep.cpsnr, 32.0);
        assert!((rep.std_error - 2.0 / 3f64.sqrt()).abs() < 1e-12);
        assert!((rep.std_error - 1.1547).abs() < 1e-4);
    }

    #[test]
    fn report_errors() {
        let a = Image::new(2, 2);
        assert_eq!(cpsnr_report(&[], &[]), Err(MetricsError::Empty));
        assert!(matches!(
            cpsnr_report(std::slice::from_ref(&a), &[]),
            Err(MetricsError::LengthMismatch { .. })
        ));
        let b = Image::from_fn(2, 2, |_, _, _| 0.5);
        assert_eq!(
            cpsnr_report(&[a.clone(), a.clone()], &[b, a]),
            Err(MetricsError::InfinitePsnr { index: 1 })
        );
    }

    #[test]
    fn json_line_shape() {
        let rep = ScoreReport::from_psnrs(vec![30.0, 32.0]).unwrap();
        let line = rep.to_json_line();
        assert!(!line.contains('\n'));
        assert!(line.starts_with("{\"cpsnr\":31.0,\"std_error\":"));
        assert!(line.contains("\"n_images\":2,\"per_image_psnr\":[30.0,32.0]}"));
        let back: ScoreReport = serde_json::from_str(&line).unwrap();
        assert_eq!(back, rep);
    }

    proptest! {
        #[test]
        fn psnr_strictly_decreasing(a in 1e-12f64..10.0, b in 1e-12f64..10.0) {
            prop_assume!(a != b);
            let (lo, hi) = if a < b { (a, b) } else { (b, a) };
            prop_assert!(psnr(lo, 1.0) > psnr(hi, 1.0));
        }

        #[test]
        fn cmse_symmetric_and_zero_iff_equal(seed in any::<u64>(), flip in any::<bool>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let a = random_image(&mut rng, 3, 5);
            let b = if flip { a.clone() } else { random_image(&mut rng, 3, 5) };
            let ab = cmse(&a, &b).unwrap();
            prop_assert_eq!(ab, cmse(&b, &a).unwrap());
            prop_assert_eq!(ab == 0.0, a == b);
        }

        #[test]
        fn report_is_permutation_invariant(seed in any::<u64>(), n in 1usize..8) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let refs: Vec<_> = (0..n).map(|_| random_image(&mut rng, 3, 3)).collect();
            let ests: Vec<_> = (0..n).map(|_| random_image(&mut rng, 3, 3)).collect();
            let base = cpsnr_report(&refs, &ests).unwrap();
            let mut order: Vec<usize> = (0..n).collect();
            order.reverse();
            order.rotate_left(seed as usize % n);
            let r2: Vec<_> = order.iter().map(|&i| refs[i].clone()).collect();
            let e2: Vec<_> = order.iter().map(|&i| ests[i].clone()).collect();
            let perm = cpsnr_report(&r2, &e2).unwrap();
            prop_assert_eq!(perm.cpsnr, base.cpsnr);
            prop_assert_eq!(perm.std_error, base.std_error);
            prop_assert_eq!(perm.n_images, base.n_images);
            prop_assert_eq!(
                cpsnr_report_with(Exec::Sequential, &refs, &ests).unwrap(),
                base
            );
        }
    }
}
