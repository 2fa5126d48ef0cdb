//! Append-only JSON-lines trial ledger.
//!
//! One object per line:
//! `{"arch","loss","std_error","complexity","wall_time","seed","status","lr","l2"}`
//! plus `error` on failed trials. `loss` and `std_error` are `null` when the
//! trial failed. `lr` and `l2` are `null` unless the evaluator trained with
//! explicit values; external tuners may append refined trials with them set.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::neuralnet::{count_params, ArchDescriptor};

use super::SearchError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrialStatus {
    Ok,
    Failed,
}

/// A successfully evaluated architecture.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialResult {
    pub arch: ArchDescriptor,
    pub loss: f64,
    pub std_error: f64,
    pub complexity: usize,
    pub wall_time: f64,
    pub seed: u64,
    pub lr: Option<f64>,
    pub l2: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LedgerEntry {
    /// Canonical key, see [`ArchDescriptor::key`].
    pub arch: String,
    pub loss: Option<f64>,
    pub std_error: Option<f64>,
    pub complexity: usize,
    pub wall_time: f64,
    pub seed: u64,
    pub status: TrialStatus,
    pub lr: Option<f64>,
    pub l2: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl LedgerEntry {
    pub fn success(trial: &TrialResult) -> Self {
        LedgerEntry {
            arch: trial.arch.key(),
            loss: Some(trial.loss),
            std_error: Some(trial.std_error),
            complexity: trial.complexity,
            wall_time: trial.wall_time,
            seed: trial.seed,
            status: TrialStatus::Ok,
            lr: trial.lr,
            l2: trial.l2,
            error: None,
        }
    }

    pub fn failure(arch: &ArchDescriptor, seed: u64, wall_time: f64, error: String) -> Self {
        LedgerEntry {
            arch: arch.key(),
            loss: None,
            std_error: None,
            complexity: count_params(arch),
            wall_time,
            seed,
            status: TrialStatus::Failed,
            lr: None,
            l2: None,
            error: Some(error),
        }
    }

    /// The trial, when it succeeded with a finite loss.
    pub fn trial(&self) -> Option<TrialResult> {
        if self.status != TrialStatus::Ok {
            return None;
        }
        let loss = self.loss.filter(|l| l.is_finite())?;
        Some(TrialResult {
            arch: self.arch.parse().ok()?,
            loss,
            std_error: self.std_error.unwrap_or(0.0),
            complexity: self.complexity,
            wall_time: self.wall_time,
            seed: self.seed,
            lr: self.lr,
            l2: self.l2,
        })
    }

    pub fn to_line(&self) -> String {
        let mut s = serde_json::to_string(self).expect("ledger entry serializes");
        s.push('\n');
        s
    }
}

/// Reads a whole ledger. A final line without its newline is an interrupted
/// write; it is dropped and reported in the returned warnings.
pub fn read_ledger(path: impl AsRef<Path>) -> Result<(Vec<LedgerEntry>, Vec<String>), SearchError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| SearchError::io(path, e))?;
    let (entries, _, warnings) = parse_ledger(path, &text)?;
    Ok((entries, warnings))
}

/// Parses ledger text. Also returns the byte length of the complete prefix.
pub(crate) fn parse_ledger(path: &Path, text: &str) -> Result<(Vec<LedgerEntry>, usize, Vec<String>), SearchError> {
    let complete = text.rfind('\n').map_or(0, |i| i + 1);
    let mut warnings = Vec::new();
    if complete < text.len() {
        warnings.push(format!(
            "{}: dropping {} bytes of an interrupted final line",
            path.display(),
            text.len() - complete
        ));
    }
    let mut entries = Vec::new();
    for (i, line) in text[..complete].lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let entry: LedgerEntry = serde_json::from_str(line).map_err(|e| SearchError::Ledger {
            path: path.to_path_buf(),
            line: i + 1,
            msg: e.to_string(),
        })?;
        entries.push(entry);
    }
    Ok((entries, complete, warnings))
}
