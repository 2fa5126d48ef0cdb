//! Exhaustive search over the architecture space, grid search over continuous
//! hyper-parameters, the Lipschitz optimality-gap check for grids, and Pareto
//! fronts over (loss, parameter count).
//!
//! Loss is always "lower is better": trained evaluators report `-cpsnr`.

mod evaluator;
mod exhaustive;
mod grid;
mod ledger;
mod pareto;
mod space;

use std::path::PathBuf;

use thiserror::Error;

pub use evaluator::{Evaluation, Evaluator, StubEvaluator, TrainingEvaluator};
pub use exhaustive::{exhaustive_search, select_best, SearchOptions, SearchOutcome};
pub use grid::{grid_search, lipschitz_bound_check, BoundCheck, GridDim, GridResult, GridSpec, DEFAULT_GRID_CAP};
pub use ledger::{read_ledger, LedgerEntry, TrialResult, TrialStatus};
pub use pareto::{pareto_front, write_csv, write_dat, ParetoFront};
pub use space::{enumerate_space, SpaceSpec};

#[derive(Debug, Error)]
pub enum SearchError {
    #[error("search space is empty")]
    EmptySpace,
    #[error("budget {budget} is outside 1..={space}")]
    InvalidBudget { budget: usize, space: usize },
    #[error("{path}:{line}: {msg}")]
    Ledger { path: PathBuf, line: usize, msg: String },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("every evaluated trial failed")]
    AllTrialsFailed,
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("grid has {points} points, over the cap of {cap}")]
    GridTooLarge { points: u128, cap: u128 },
    #[error("evaluation failed at {at}: {msg}")]
    Evaluator { at: String, msg: String },
    #[error("invalid bound check input: {0}")]
    InvalidBound(String),
}

impl SearchError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        SearchError::Io {
            path: path.into(),
            source,
        }
    }
}
