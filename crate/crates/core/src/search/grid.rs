//! Multivariate grid search and the Lipschitz optimality-gap check.

use super::SearchError;

/// Default for [`GridSpec::cap`].
pub const DEFAULT_GRID_CAP: u128 = 1_000_000;

const ROUNDING_ULPS: f64 = 4.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridDim {
    pub lo: f64,
    pub hi: f64,
    /// Grid the base-10 exponent instead of the value.
    pub log: bool,
}

impl GridDim {
    pub fn linear(lo: f64, hi: f64) -> Self {
        GridDim { lo, hi, log: false }
    }

    pub fn log(lo: f64, hi: f64) -> Self {
        GridDim { lo, hi, log: true }
    }

    /// Learning rates, annealing rates and regularization constants are
    /// log-scaled.
    pub fn rate(lo: f64, hi: f64) -> Self {
        Self::log(lo, hi)
    }

    /// Point `j` of `n`. Computed as `a + (b - a) * j / (n - 1)`, so the grid
    /// of `2n - 1` points contains the grid of `n` points bit for bit.
    pub fn point(&self, j: usize, n: usize) -> f64 {
        let (a, b) = self.bounds();
        let t = if j + 1 == n {
            b
        } else {
            a + (b - a) * j as f64 / (n - 1) as f64
        };
        if self.log {
            10f64.powf(t)
        } else {
            t
        }
    }

    /// Step `(b - a) / (n - 1)`, in exponent units for log dimensions.
    pub fn step(&self, n: usize) -> f64 {
        let (a, b) = self.bounds();
        (b - a) / (n - 1) as f64
    }

    fn bounds(&self) -> (f64, f64) {
        if self.log {
            (self.lo.log10(), self.hi.log10())
        } else {
            (self.lo, self.hi)
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridSpec {
    pub dims: Vec<GridDim>,
    /// Points per dimension.
    pub n: usize,
    pub cap: u128,
}

impl GridSpec {
    pub fn new(dims: Vec<GridDim>, n: usize) -> Self {
        GridSpec {
            dims,
            n,
            cap: DEFAULT_GRID_CAP,
        }
    }

    pub fn total_points(&self) -> u128 {
        (self.n as u128).saturating_pow(self.dims.len() as u32)
    }

    pub fn validate(&self) -> Result<(), SearchError> {
        if self.dims.is_empty() {
            return Err(SearchError::InvalidGrid("no dimensions".into()));
        }
        if self.n < 2 {
            return Err(SearchError::InvalidGrid(format!("need n >= 2, got {}", self.n)));
        }
        for (i, d) in self.dims.iter().enumerate() {
            if !(d.lo.is_finite() && d.hi.is_finite() && d.lo < d.hi) {
                return Err(SearchError::InvalidGrid(format!("dimension {i}: need finite lo < hi")));
            }
            if d.log && d.lo <= 0.0 {
                return Err(SearchError::InvalidGrid(format!(
                    "dimension {i}: log scale needs lo > 0"
                )));
            }
        }
        let points = self.total_points();
        if points > self.cap {
            return Err(SearchError::GridTooLarge { points, cap: self.cap });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridResult {
    pub theta: Vec<f64>,
    pub loss: f64,
    /// Every `(point, loss)` in evaluation order (first dimension slowest).
    pub evaluations: Vec<(Vec<f64>, f64)>,
}

/// Evaluates every grid point and returns the first one with the lowest loss.
/// An evaluator error or a NaN loss aborts the search.
pub fn grid_search<F>(spec: &GridSpec, mut evaluate: F) -> Result<GridResult, SearchError>
where
    F: FnMut(&[f64]) -> Result<f64, String>,
{
    spec.validate()?;
    let d = spec.dims.len();
    let mut index = vec![0usize; d];
    let mut evaluations = Vec::with_capacity(spec.total_points() as usize);
    let mut best: Option<(usize, f64)> = None;
    loop {
        let theta: Vec<f64> = spec
            .dims
            .iter()
            .zip(&index)
            .map(|(dim, &j)| dim.point(j, spec.n))
            .collect();
        let at = || format!("{theta:?}");
        let loss = evaluate(&theta).map_err(|msg| SearchError::Evaluator { at: at(), msg })?;
        if loss.is_nan() {
            return Err(SearchError::Evaluator {
                at: at(),
                msg: "NaN loss".into(),
            });
        }
        if best.is_none_or(|(_, b)| loss < b) {
            best = Some((evaluations.len(), loss));
        }
        evaluations.push((theta, loss));

        // Odometer increment, last dimension fastest.
        let mut k = d;
        loop {
            if k == 0 {
                let (i, loss) = best.expect("at least one point");
                return Ok(GridResult {
                    theta: evaluations[i].0.clone(),
                    loss,
                    evaluations,
                });
            }
            k -= 1;
            index[k] += 1;
            if index[k] < spec.n {
                break;
            }
            index[k] = 0;
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundCheck {
    pub passed: bool,
    /// `l_ref - (min - m * delta / 2)`, unrounded.
    pub margin: f64,
    /// Smallest evaluated loss.
    pub best: f64,
}

/// Checks `min(evaluations) - m * delta / 2 <= l_ref`: a grid of step `delta`
/// over an `m`-Lipschitz objective lands within `m * delta / 2` of the true
/// optimum `l_ref`.
///
/// When the optimum sits exactly midway between grid points the bound holds
/// with equality, so the check accepts margins down to a few ulps below zero
/// (`ROUNDING_ULPS` epsilons relative to the operands).
pub fn lipschitz_bound_check(evaluations: &[f64], m: f64, delta: f64, l_ref: f64) -> Result<BoundCheck, SearchError> {
    if !(m > 0.0 && delta > 0.0) {
        return Err(SearchError::InvalidBound(format!(
            "need m > 0 and delta > 0, got m={m} delta={delta}"
        )));
    }
    if evaluations.is_empty() || evaluations.iter().any(|v| v.is_nan()) {
        return Err(SearchError::InvalidBound(
            "evaluations must be non-empty and free of NaN".into(),
        ));
    }
    let best = evaluations.iter().copied().fold(f64::INFINITY, f64::min);
    let gap = m * delta / 2.0;
    let margin = l_ref - (best - gap);
    let tolerance = ROUNDING_ULPS * f64::EPSILON * (best.abs() + gap + l_ref.abs());
    Ok(BoundCheck {
        passed: margin >= -tolerance,
        margin,
        best,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn one_d(n: usize) -> GridSpec {
        GridSpec::new(vec![GridDim::linear(0.0, 1.0)], n)
    }

    #[test]
    fn quadratic_on_grid() {
        let r = grid_search(&one_d(11), |t| Ok((t[0] - 0.3).powi(2))).unwrap();
        assert_eq!(r.theta, vec![0.3]);
        assert_eq!(r.loss, 0.0);
        assert_eq!(r.evaluations.len(), 11);
    }

    #[test]
    fn quadratic_between_grid_points() {
        let r = grid_search(&one_d(6), |t| Ok((t[0] - 0.3).powi(2))).unwrap();
        assert!(r.theta == vec![0.2] || r.theta == vec![0.4]);
        assert!((r.loss - 0.01).abs() < 1e-15);
    }

    #[test]
    fn ties_keep_first_point() {
        let r = grid_search(&one_d(5), |_| Ok(2.0)).unwrap();
        assert_eq!(r.theta, vec![0.0]);
    }

    #[test]
    fn two_dims_monotone() {
        let spec = GridSpec::new(vec![GridDim::linear(0.0, 1.0); 2], 2);
        let r = grid_search(&spec, |t| Ok(t[0] + t[1])).unwrap();
        assert_eq!(r.theta, vec![0.0, 0.0]);
        assert_eq!(r.evaluations.len(), 4);
        assert_eq!(r.evaluations[1].0, vec![0.0, 1.0]);
    }

    #[test]
    fn log_dimension_grids_the_exponent() {
        let spec = GridSpec::new(vec![GridDim::rate(1e-6, 1e-2)], 5);
        let r = grid_search(&spec, |t| Ok(t[0])).unwrap();
        let pts: Vec<f64> = r.evaluations.iter().map(|e| e.0[0]).collect();
        for (p, want) in pts.iter().zip([1e-6, 1e-5, 1e-4, 1e-3, 1e-2]) {
            assert!((p / want - 1.0).abs() < 1e-12, "{p} vs {want}");
        }
        assert_eq!(spec.dims[0].step(5), 1.0);
    }

    #[test]
    fn grids_nest_exactly() {
        let dim = GridDim::linear(-0.7, 2.3);
        let mut n = 2;
        while n < 200 {
            let m = 2 * n - 1;
            for j in 0..n {
                assert_eq!(dim.point(j, n).to_bits(), dim.point(2 * j, m).to_bits());
            }
            n = m;
        }
    }

    #[test]
    fn rejects_bad_specs() {
        assert!(grid_search(&one_d(1), |_| Ok(0.0)).is_err());
        assert!(grid_search(&GridSpec::new(vec![GridDim::linear(1.0, 1.0)], 3), |_| Ok(0.0)).is_err());
        assert!(grid_search(&GridSpec::new(vec![GridDim::log(0.0, 1.0)], 3), |_| Ok(0.0)).is_err());
        let huge = GridSpec::new(vec![GridDim::linear(0.0, 1.0); 4], 100);
        assert!(matches!(
            grid_search(&huge, |_| Ok(0.0)),
            Err(SearchError::GridTooLarge { .. })
        ));
        assert!(matches!(
            grid_search(&one_d(3), |t| if t[0] > 0.6 { Err("no".into()) } else { Ok(0.0) }),
            Err(SearchError::Evaluator { .. })
        ));
        assert!(grid_search(&one_d(3), |_| Ok(f64::NAN)).is_err());
    }

    #[test]
    fn abs_bound_is_tight() {
        let r = grid_search(&one_d(6), |t| Ok((t[0] - 0.3).abs())).unwrap();
        let vals: Vec<f64> = r.evaluations.iter().map(|e| e.1).collect();
        let check = lipschitz_bound_check(&vals, 1.0, 0.2, 0.0).unwrap();
        assert!(check.passed);
        assert!(check.margin.abs() < 1e-15);
        assert!((check.best - 0.1).abs() < 1e-15);
        let fail = lipschitz_bound_check(&vals, 0.5, 0.2, 0.0).unwrap();
        assert!(!fail.passed);
        assert!(lipschitz_bound_check(&vals, 0.0, 0.2, 0.0).is_err());
        assert!(lipschitz_bound_check(&[], 1.0, 0.2, 0.0).is_err());
    }
}
