//! TOML search configuration.
//!
//! ```toml
//! [search]
//! ledger = "ledger.jsonl"      # relative paths resolve against this file
//! budget = 10                  # optional; default is the whole space
//! seed = 0                     # weight-init seed; default $DEMOSAIC_NAS_SEED or 0
//! checkpoints = "ckpt"         # optional; saves every trained network
//!
//! [space]                      # any omitted list keeps its full default
//! filters = [16, 32]
//! conv_kinds = ["standard", "separable"]
//!
//! [train]                      # TrainConfig fields; seed defaults to [search].seed
//! epochs = 25
//! batch_size = 8
//!
//! [data]                       # patch directories (not needed with --stub-evaluator)
//! train = "patches/train"
//! valid = "patches/valid"
//! ```

use std::fs;
use std::path::{Path, PathBuf};

use demosaic_nas::neuralnet::TrainConfig;
use demosaic_nas::search::SpaceSpec;
use serde::Deserialize;

use crate::{CliError, SEED_ENV};

#[derive(Debug, Clone, PartialEq)]
pub struct SearchConfig {
    pub search: SearchSection,
    pub space: SpaceSpec,
    pub train: TrainConfig,
    pub data: DataSection,
    /// Directory relative paths are resolved against.
    pub base_dir: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SearchSection {
    #[serde(default = "default_ledger")]
    pub ledger: PathBuf,
    pub budget: Option<usize>,
    pub seed: Option<u64>,
    pub checkpoints: Option<PathBuf>,
}

impl Default for SearchSection {
    fn default() -> Self {
        SearchSection {
            ledger: default_ledger(),
            budget: None,
            seed: None,
            checkpoints: None,
        }
    }
}

fn default_ledger() -> PathBuf {
    PathBuf::from("ledger.jsonl")
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataSection {
    pub train: Option<PathBuf>,
    pub valid: Option<PathBuf>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    #[serde(default)]
    search: SearchSection,
    #[serde(default)]
    space: SpaceSpec,
    #[serde(default)]
    train: toml::Table,
    #[serde(default)]
    data: DataSection,
}

impl SearchConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        let base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Self::parse(&text, base_dir).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
    }

    pub fn parse(text: &str, base_dir: PathBuf) -> Result<Self, String> {
        let raw: RawConfig = toml::from_str(text).map_err(|e| e.to_string())?;
        let mut search = raw.search;
        let seed = match search.seed {
            Some(s) => s,
            None => env_seed()?,
        };
        search.seed = Some(seed);
        let mut train_table = raw.train;
        if !train_table.contains_key("seed") {
            train_table.insert("seed".into(), toml::Value::Integer(seed as i64));
        }
        let train: TrainConfig = train_table
            .try_into()
            .map_err(|e: toml::de::Error| format!("[train]: {e}"))?;
        train.validate().map_err(|e| format!("[train]: {e}"))?;
        if raw.space.enumerate().is_empty() {
            return Err("[space] selects no architectures".into());
        }
        Ok(SearchConfig {
            search,
            space: raw.space,
            train,
            data: raw.data,
            base_dir,
        })
    }

    pub fn seed(&self) -> u64 {
        self.search.seed.unwrap_or(0)
    }

    fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    pub fn ledger_path(&self) -> PathBuf {
        self.resolve(&self.search.ledger)
    }

    pub fn checkpoint_dir(&self) -> Option<PathBuf> {
        self.search.checkpoints.as_deref().map(|p| self.resolve(p))
    }

    pub fn data_dirs(&self) -> Result<(PathBuf, PathBuf), CliError> {
        match (&self.data.train, &self.data.valid) {
            (Some(t), Some(v)) => Ok((self.resolve(t), self.resolve(v))),
            _ => Err(CliError::Usage(
                "[data] needs `train` and `valid` patch directories (or pass --stub-evaluator)".into(),
            )),
        }
    }
}

fn env_seed() -> Result<u64, String> {
    match std::env::var(SEED_ENV) {
        Ok(v) => v
            .trim()
            .parse()
            .map_err(|_| format!("{SEED_ENV}=`{v}` is not an unsigned integer")),
        Err(_) => Ok(0),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use demosaic_nas::neuralnet::{ConvKind, OptimizerKind};

    #[test]
    fn full_example() {
        let text = r#"
            [search]
            ledger = "runs/l.jsonl"
            budget = 2
            seed = 9
            [space]
            filters = [16]
            blocks = [3]
            conv_kinds = ["standard", "separable"]
            skip_lengths = [1]
            schedules = ["fixed"]
            [train]
            epochs = 25
            optimizer = "sgd"
            [data]
            train = "t"
            valid = "/abs/v"
        "#;
        let cfg = SearchConfig::parse(text, PathBuf::from("/cfg")).unwrap();
        assert_eq!(cfg.space.enumerate().len(), 2);
        assert_eq!(cfg.space.enumerate()[1].conv_kind, ConvKind::Separable);
        assert_eq!(cfg.train.epochs, 25);
        assert_eq!(cfg.train.optimizer, OptimizerKind::Sgd);
        assert_eq!(cfg.train.seed, 9);
        assert_eq!(cfg.train.lr, 1e-4);
        assert_eq!(cfg.ledger_path(), PathBuf::from("/cfg/runs/l.jsonl"));
        assert_eq!(
            cfg.data_dirs().unwrap(),
            (PathBuf::from("/cfg/t"), PathBuf::from("/abs/v"))
        );
    }

    #[test]
    fn explicit_train_seed_wins() {
        let cfg = SearchConfig::parse("[search]\nseed = 3\n[train]\nseed = 4\n", PathBuf::new()).unwrap();
        assert_eq!((cfg.seed(), cfg.train.seed), (3, 4));
        assert_eq!(cfg.space.enumerate().len(), 120);
        assert!(cfg.data_dirs().is_err());
    }

    #[test]
    fn malformed_configs() {
        for bad in [
            "[search]\nbudgett = 1\n",
            "[space]\nfilters = []\n",
            "[train]\nlr = -1.0\n",
            "[train]\nepocs = 3\n",
            "[space]\nconv_kinds = [\"dense\"]\n",
            "not toml",
        ] {
            assert!(SearchConfig::parse(bad, PathBuf::new()).is_err(), "{bad}");
        }
    }
}
