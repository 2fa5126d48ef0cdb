use std::fs;
use std::path::Path;

use super::ledger::TrialResult;
use super::SearchError;

/// Non-dominated trials under (loss, complexity), both minimized. Sorted by
/// ascending complexity, so loss strictly decreases along the list.
#[derive(Debug, Clone, PartialEq)]
pub struct ParetoFront {
    pub entries: Vec<TrialResult>,
}

/// Sort by (complexity, loss, input position) and keep each trial that beats
/// every cheaper one on loss. Exact duplicates keep the earliest trial.
pub fn pareto_front(trials: &[TrialResult]) -> ParetoFront {
    let mut order: Vec<usize> = (0..trials.len()).collect();
    order.sort_by(|&a, &b| {
        let (ta, tb) = (&trials[a], &trials[b]);
        ta.complexity
            .cmp(&tb.complexity)
            .then(ta.loss.total_cmp(&tb.loss))
            .then(a.cmp(&b))
    });
    let mut entries: Vec<TrialResult> = Vec::new();
    for i in order {
        if entries.last().is_none_or(|last| trials[i].loss < last.loss) {
            entries.push(trials[i].clone());
        }
    }
    ParetoFront { entries }
}

impl ParetoFront {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// CSV with header `complexity,loss,std_error,arch`.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("complexity,loss,std_error,arch\n");
        for t in &self.entries {
            s.push_str(&format!(
                "{},{},{},{}\n",
                t.complexity,
                t.loss,
                t.std_error,
                t.arch.key()
            ));
        }
        s
    }

    /// Two whitespace-separated columns, complexity and loss, for gnuplot.
    pub fn to_dat(&self) -> String {
        let mut s = String::from("# complexity loss\n");
        for t in &self.entries {
            s.push_str(&format!("{} {}\n", t.complexity, t.loss));
        }
        s
    }
}

pub fn write_csv(front: &ParetoFront, path: impl AsRef<Path>) -> Result<(), SearchError> {
    let path = path.as_ref();
    fs::write(path, front.to_csv()).map_err(|e| SearchError::io(path, e))
}

pub fn write_dat(front: &ParetoFront, path: impl AsRef<Path>) -> Result<(), SearchError> {
    let path = path.as_ref();
    fs::write(path, front.to_dat()).map_err(|e| SearchError::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::neuralnet::{ArchDescriptor, ConvKind, Schedule};

    fn t(loss: f64, complexity: usize) -> TrialResult {
        TrialResult {
            arch: ArchDescriptor::new(complexity, 3, ConvKind::Standard, 1, Schedule::Fixed),
            loss,
            std_error: 0.0,
            complexity,
            wall_time: 0.0,
            seed: 0,
            lr: None,
            l2: None,
        }
    }

    fn pairs(f: &ParetoFront) -> Vec<(f64, usize)> {
        f.entries.iter().map(|e| (e.loss, e.complexity)).collect()
    }

    #[test]
    fn hand_set() {
        let front = pareto_front(&[t(1.0, 5), t(2.0, 3), t(3.0, 1), t(2.0, 6)]);
        assert_eq!(pairs(&front), vec![(3.0, 1), (2.0, 3), (1.0, 5)]);
    }

    #[test]
    fn single_and_empty() {
        assert_eq!(pareto_front(&[t(4.0, 2)]).len(), 1);
        assert!(pareto_front(&[]).is_empty());
    }

    #[test]
    fn duplicates_keep_earliest() {
        let mut a = t(1.0, 2);
        a.seed = 1;
        let mut b = t(1.0, 2);
        b.seed = 2;
        let front = pareto_front(&[a, b]);
        assert_eq!(front.len(), 1);
        assert_eq!(front.entries[0].seed, 1);
    }

    #[test]
    fn csv_and_dat() {
        let front = pareto_front(&[t(-30.5, 100), t(-31.0, 200)]);
        assert_eq!(
            front.to_csv(),
            "complexity,loss,std_error,arch\n100,-30.5,0,f100-b3-standard-s1-fixed\n200,-31,0,f200-b3-standard-s1-fixed\n"
        );
        assert_eq!(front.to_dat(), "# complexity loss\n100 -30.5\n200 -31\n");
    }
}
