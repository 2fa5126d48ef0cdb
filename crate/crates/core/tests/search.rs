use std::fs;

use demosaic_nas::neuralnet::{count_params, ArchDescriptor, ConvKind, Schedule};
use demosaic_nas::search::{
    enumerate_space, exhaustive_search, grid_search, lipschitz_bound_check, pareto_front, read_ledger, GridDim,
    GridSpec, SearchOptions, StubEvaluator, TrialResult,
};
use proptest::prelude::*;

fn stub_run(path: &std::path::Path, budget: Option<usize>, jobs: usize) -> demosaic_nas::search::SearchOutcome {
    let opts = SearchOptions {
        budget,
        ledger: Some(path.to_path_buf()),
        jobs,
    };
    exhaustive_search(&enumerate_space(), &StubEvaluator::default(), &opts).unwrap()
}

#[test]
fn best_matches_ledger_minimum() {
    let dir = tempfile::tempdir().unwrap();
    for budget in [1, 7, 120] {
        let path = dir.path().join(format!("b{budget}.jsonl"));
        let out = stub_run(&path, Some(budget), 1);
        let (entries, warnings) = read_ledger(&path).unwrap();
        assert!(warnings.is_empty());
        assert_eq!(entries.len(), budget);
        let min = entries.iter().map(|e| e.loss.unwrap()).fold(f64::INFINITY, f64::min);
        assert_eq!(out.best.loss, min);
        let cheapest = enumerate_space()[..budget].iter().map(count_params).min().unwrap();
        assert_eq!(out.best.loss, cheapest as f64);
    }
}

#[test]
fn resume_from_every_cut_is_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let full_path = dir.path().join("full.jsonl");
    let full = stub_run(&full_path, None, 1);
    let bytes = fs::read(&full_path).unwrap();
    let line_ends: Vec<usize> = bytes
        .iter()
        .enumerate()
        .filter(|(_, b)| **b == b'\n')
        .map(|(i, _)| i + 1)
        .collect();
    assert_eq!(line_ends.len(), 120);

    let cut_path = dir.path().join("cut.jsonl");
    let mut cuts: Vec<usize> = vec![0];
    cuts.extend(&line_ends);
    // Also cut mid-line, as a kill during a write would.
    cuts.extend(line_ends.iter().step_by(13).map(|e| e - 7));
    for cut in cuts {
        fs::write(&cut_path, &bytes[..cut]).unwrap();
        let resumed = stub_run(&cut_path, None, 1);
        assert_eq!(fs::read(&cut_path).unwrap(), bytes, "cut at byte {cut}");
        assert_eq!(resumed.best, full.best);
        assert_eq!(resumed.all, full.all);
        let done_before = line_ends.iter().filter(|&&e| e <= cut).count();
        assert_eq!(resumed.evaluated, 120 - done_before);
    }
}

#[test]
fn parallel_jobs_write_the_same_ledger() {
    let dir = tempfile::tempdir().unwrap();
    let seq = dir.path().join("seq.jsonl");
    let par = dir.path().join("par.jsonl");
    let a = stub_run(&seq, None, 1);
    let b = stub_run(&par, None, 8);
    assert_eq!(fs::read(&seq).unwrap(), fs::read(&par).unwrap());
    assert_eq!(a.best, b.best);
}

#[test]
fn growing_the_budget_extends_the_ledger() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("l.jsonl");
    stub_run(&path, Some(2), 1);
    let out = stub_run(&path, Some(10), 3);
    assert_eq!(out.evaluated, 8);
    assert_eq!(read_ledger(&path).unwrap().0.len(), 10);
}

fn quadratic(t: f64) -> f64 {
    (t - 0.3) * (t - 0.3)
}

type Analytic = (&'static str, fn(f64) -> f64, f64, f64);

fn analytic_suite() -> Vec<Analytic> {
    // (name, f, Lipschitz constant on [0, 1], true minimum on [0, 1])
    vec![
        ("abs", |t| (t - 0.3).abs(), 1.0, 0.0),
        ("quadratic", quadratic, 1.4, 0.0),
        ("sine", |t| (5.0 * t).sin(), 5.0, -1.0),
    ]
}

#[test]
fn lipschitz_bound_holds_on_every_grid() {
    for (name, f, m, l_ref) in analytic_suite() {
        for n in 2..=64 {
            let spec = GridSpec::new(vec![GridDim::linear(0.0, 1.0)], n);
            let r = grid_search(&spec, |t| Ok(f(t[0]))).unwrap();
            let losses: Vec<f64> = r.evaluations.iter().map(|e| e.1).collect();
            let check = lipschitz_bound_check(&losses, m, spec.dims[0].step(n), l_ref).unwrap();
            assert!(check.passed, "{name} n={n} margin {:e}", check.margin);
            assert_eq!(check.best, r.loss);
        }
    }
}

#[test]
fn nested_grids_never_get_worse() {
    for (name, f, _, _) in analytic_suite() {
        let mut prev = f64::INFINITY;
        for n in [2, 3, 5, 9, 17, 33, 65] {
            let spec = GridSpec::new(vec![GridDim::linear(0.0, 1.0)], n);
            let loss = grid_search(&spec, |t| Ok(f(t[0]))).unwrap().loss;
            assert!(loss <= prev, "{name} n={n}: {loss} > {prev}");
            prev = loss;
        }
    }
}

fn trial(loss: f64, complexity: usize) -> TrialResult {
    TrialResult {
        arch: ArchDescriptor::new(16, 3, ConvKind::Standard, 1, Schedule::Fixed),
        loss,
        std_error: 0.0,
        complexity,
        wall_time: 0.0,
        seed: 0,
        lr: None,
        l2: None,
    }
}

/// Quadratic pairwise-domination oracle; keeps the first of exact duplicates.
fn oracle(trials: &[TrialResult]) -> Vec<(f64, usize)> {
    let mut keep: Vec<(f64, usize)> = Vec::new();
    for (i, t) in trials.iter().enumerate() {
        let dominated = trials.iter().enumerate().any(|(j, o)| {
            let weakly = o.loss <= t.loss && o.complexity <= t.complexity;
            let strictly = o.loss < t.loss || o.complexity < t.complexity;
            (weakly && strictly) || (j < i && o.loss == t.loss && o.complexity == t.complexity)
        });
        if !dominated {
            keep.push((t.loss, t.complexity));
        }
    }
    keep.sort_by_key(|k| k.1);
    keep
}

fn pairs(ts: &[TrialResult]) -> Vec<(f64, usize)> {
    ts.iter().map(|t| (t.loss, t.complexity)).collect()
}

proptest! {
    #[test]
    fn pareto_matches_oracle(raw in prop::collection::vec((0u8..40, 0usize..40), 1..200)) {
        let trials: Vec<TrialResult> = raw.iter().map(|&(l, c)| trial(l as f64 / 4.0, c)).collect();
        let front = pareto_front(&trials);
        prop_assert_eq!(pairs(&front.entries), oracle(&trials));
        for w in front.entries.windows(2) {
            prop_assert!(w[0].complexity < w[1].complexity && w[0].loss > w[1].loss);
        }
    }

    #[test]
    fn readding_dominated_points_is_idempotent(raw in prop::collection::vec((0u8..40, 0usize..40), 1..100)) {
        let trials: Vec<TrialResult> = raw.iter().map(|&(l, c)| trial(l as f64, c)).collect();
        let front = pareto_front(&trials);
        let dominated: Vec<TrialResult> = trials
            .iter()
            .filter(|t| !front.entries.iter().any(|e| e.loss == t.loss && e.complexity == t.complexity))
            .cloned()
            .collect();
        let mut again = front.entries.clone();
        again.extend(dominated);
        prop_assert_eq!(pareto_front(&again), front);
    }

    #[test]
    fn nested_grid_property(a in -5.0f64..5.0, width in 0.1f64..10.0, n in 2usize..20, c in -3.0f64..3.0) {
        let spec = |n| GridSpec::new(vec![GridDim::linear(a, a + width)], n);
        let f = |t: &[f64]| Ok((t[0] - c).abs().sqrt());
        let coarse = grid_search(&spec(n), f).unwrap().loss;
        let fine = grid_search(&spec(2 * n - 1), f).unwrap().loss;
        prop_assert!(fine <= coarse);
    }
}
