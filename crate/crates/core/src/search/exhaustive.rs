use std::collections::{BTreeMap, HashMap, HashSet};
use std::fs::{File, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::mpsc;
use std::thread;

use crate::neuralnet::{count_params, ArchDescriptor};

use super::evaluator::Evaluator;
use super::ledger::{parse_ledger, LedgerEntry, TrialResult};
use super::SearchError;

#[derive(Debug, Clone, Default)]
pub struct SearchOptions {
    /// Evaluate only the first `budget` points of the space.
    pub budget: Option<usize>,
    /// Ledger file; trials already in it are not re-evaluated.
    pub ledger: Option<PathBuf>,
    /// Concurrent evaluator calls (0 and 1 both mean sequential).
    pub jobs: usize,
}

#[derive(Debug, Clone)]
pub struct SearchOutcome {
    pub best: TrialResult,
    /// One entry per point of the run, in enumeration order.
    pub all: Vec<LedgerEntry>,
    /// Number of evaluator calls made by this invocation.
    pub evaluated: usize,
    pub warnings: Vec<String>,
}

/// The incumbent after visiting `entries` in order, replacing it only on a
/// strictly lower loss. Failed trials are skipped.
pub fn select_best(entries: &[LedgerEntry]) -> Option<TrialResult> {
    let mut best: Option<TrialResult> = None;
    for trial in entries.iter().filter_map(LedgerEntry::trial) {
        if best.as_ref().is_none_or(|b| trial.loss < b.loss) {
            best = Some(trial);
        }
    }
    best
}

/// Evaluates the first `budget` points of `space` in order and returns the
/// minimum-loss trial (earliest wins ties).
///
/// With a ledger, every finished trial is appended as soon as it is final and
/// a rerun only evaluates the missing points. Ledger lines are written in
/// enumeration order whatever `jobs` is, so an interrupted-and-resumed run
/// leaves the same file as an uninterrupted one (for a deterministic
/// evaluator). Evaluator errors and non-finite losses are recorded as failed
/// trials and the search moves on.
pub fn exhaustive_search(
    space: &[ArchDescriptor],
    evaluator: &dyn Evaluator,
    opts: &SearchOptions,
) -> Result<SearchOutcome, SearchError> {
    if space.is_empty() {
        return Err(SearchError::EmptySpace);
    }
    let k = opts.budget.unwrap_or(space.len());
    if k == 0 || k > space.len() {
        return Err(SearchError::InvalidBudget {
            budget: k,
            space: space.len(),
        });
    }
    let points = &space[..k];

    let mut warnings = Vec::new();
    let mut done: HashMap<String, LedgerEntry> = HashMap::new();
    let mut sink = match &opts.ledger {
        Some(path) => {
            let (entries, file) = open_ledger(path, &mut warnings)?;
            let wanted: HashSet<String> = points.iter().map(|a| a.key()).collect();
            for entry in entries {
                if !wanted.contains(&entry.arch) {
                    warnings.push(format!(
                        "{}: ignoring trial `{}` outside this run",
                        path.display(),
                        entry.arch
                    ));
                    continue;
                }
                done.entry(entry.arch.clone()).or_insert(entry);
            }
            Some((path.clone(), file))
        }
        None => None,
    };

    let mut seen = HashSet::new();
    let pending: Vec<ArchDescriptor> = points
        .iter()
        .filter(|a| !done.contains_key(&a.key()) && seen.insert(a.key()))
        .copied()
        .collect();

    let mut record = |entry: LedgerEntry| -> Result<(), SearchError> {
        if let Some((path, file)) = sink.as_mut() {
            file.write_all(entry.to_line().as_bytes())
                .and_then(|_| file.flush())
                .map_err(|e| SearchError::io(path.clone(), e))?;
        }
        done.insert(entry.arch.clone(), entry);
        Ok(())
    };

    let jobs = opts.jobs.max(1).min(pending.len().max(1));
    if jobs == 1 {
        for arch in &pending {
            record(run_trial(evaluator, arch))?;
        }
    } else {
        // Workers evaluate; this thread is the only ledger writer and emits
        // results in enumeration order through a reorder buffer.
        let next = AtomicUsize::new(0);
        thread::scope(|scope| -> Result<(), SearchError> {
            let (tx, rx) = mpsc::channel();
            for _ in 0..jobs {
                let tx = tx.clone();
                let (next, pending) = (&next, &pending);
                scope.spawn(move || loop {
                    let i = next.fetch_add(1, Ordering::Relaxed);
                    let Some(arch) = pending.get(i) else { break };
                    if tx.send((i, run_trial(evaluator, arch))).is_err() {
                        break;
                    }
                });
            }
            drop(tx);
            let mut buffer = BTreeMap::new();
            let mut emit = 0;
            for (i, entry) in rx {
                buffer.insert(i, entry);
                while let Some(entry) = buffer.remove(&emit) {
                    if let Err(e) = record(entry) {
                        // Stop handing out work; running trials finish and are dropped.
                        next.store(pending.len(), Ordering::Relaxed);
                        return Err(e);
                    }
                    emit += 1;
                }
            }
            Ok(())
        })?;
    }

    let all: Vec<LedgerEntry> = points.iter().map(|a| done[&a.key()].clone()).collect();
    let best = select_best(&all).ok_or(SearchError::AllTrialsFailed)?;
    Ok(SearchOutcome {
        best,
        all,
        evaluated: pending.len(),
        warnings,
    })
}

fn run_trial(evaluator: &dyn Evaluator, arch: &ArchDescriptor) -> LedgerEntry {
    let seed = evaluator.seed();
    match evaluator.evaluate(arch) {
        Ok(ev) if ev.loss.is_finite() => LedgerEntry::success(&TrialResult {
            arch: *arch,
            loss: ev.loss,
            std_error: ev.std_error,
            complexity: count_params(arch),
            wall_time: ev.wall_time,
            seed,
            lr: ev.lr,
            l2: ev.l2,
        }),
        Ok(ev) => LedgerEntry::failure(arch, seed, ev.wall_time, format!("non-finite loss {}", ev.loss)),
        Err(msg) => LedgerEntry::failure(arch, seed, 0.0, msg),
    }
}

/// Reads an existing ledger, cuts off an interrupted final line, and opens
/// the file for appending.
fn open_ledger(path: &Path, warnings: &mut Vec<String>) -> Result<(Vec<LedgerEntry>, File), SearchError> {
    let text = match std::fs::read_to_string(path) {
        Ok(t) => t,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => String::new(),
        Err(e) => return Err(SearchError::io(path, e)),
    };
    let (entries, complete, mut w) = parse_ledger(path, &text)?;
    warnings.append(&mut w);
    let file = OpenOptions::new()
        .create(true)
        .append(true)
        .open(path)
        .map_err(|e| SearchError::io(path, e))?;
    if complete < text.len() {
        file.set_len(complete as u64).map_err(|e| SearchError::io(path, e))?;
    }
    Ok((entries, file))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::neuralnet::{ConvKind, Schedule};
    use crate::search::{enumerate_space, Evaluation, StubEvaluator};

    #[test]
    fn stub_best_is_smallest_separable() {
        let out = exhaustive_search(&enumerate_space(), &StubEvaluator::default(), &SearchOptions::default()).unwrap();
        assert_eq!(
            out.best.arch,
            ArchDescriptor::new(16, 3, ConvKind::Separable, 1, Schedule::Fixed)
        );
        assert_eq!(out.all.len(), 120);
        assert_eq!(out.evaluated, 120);
    }

    #[test]
    fn budget_one_is_first_point() {
        let space = enumerate_space();
        let opts = SearchOptions {
            budget: Some(1),
            ..Default::default()
        };
        let out = exhaustive_search(&space, &StubEvaluator::default(), &opts).unwrap();
        assert_eq!(out.best.arch, space[0]);
        assert_eq!(out.best.loss, count_params(&space[0]) as f64);
    }

    #[test]
    fn bad_budgets() {
        let space = enumerate_space();
        for budget in [0, 121] {
            let opts = SearchOptions {
                budget: Some(budget),
                ..Default::default()
            };
            assert!(matches!(
                exhaustive_search(&space, &StubEvaluator::default(), &opts),
                Err(SearchError::InvalidBudget { .. })
            ));
        }
        assert!(matches!(
            exhaustive_search(&[], &StubEvaluator::default(), &SearchOptions::default()),
            Err(SearchError::EmptySpace)
        ));
    }

    #[test]
    fn failures_are_recorded_and_skipped() {
        let space = enumerate_space();
        let eval = |a: &ArchDescriptor| -> Result<Evaluation, String> {
            match a.filters {
                16 => Err("boom".into()),
                32 => Ok(Evaluation {
                    loss: f64::NAN,
                    std_error: 0.0,
                    wall_time: 0.0,
                    lr: None,
                    l2: None,
                }),
                _ => StubEvaluator::default().evaluate(a),
            }
        };
        let out = exhaustive_search(&space, &eval, &SearchOptions::default()).unwrap();
        assert_eq!(out.best.arch.filters, 64);
        assert_eq!(out.all.iter().filter(|e| e.trial().is_none()).count(), 48);
        let opts = SearchOptions {
            budget: Some(24),
            ..Default::default()
        };
        assert!(matches!(
            exhaustive_search(&space, &eval, &opts),
            Err(SearchError::AllTrialsFailed)
        ));
    }

    #[test]
    fn ties_keep_the_earliest() {
        let flat = |_: &ArchDescriptor| -> Result<Evaluation, String> {
            Ok(Evaluation {
                loss: 1.0,
                std_error: 0.0,
                wall_time: 0.0,
                lr: None,
                l2: None,
            })
        };
        let space = enumerate_space();
        let out = exhaustive_search(
            &space,
            &flat,
            &SearchOptions {
                jobs: 4,
                ..Default::default()
            },
        )
        .unwrap();
        assert_eq!(out.best.arch, space[0]);
    }
}
