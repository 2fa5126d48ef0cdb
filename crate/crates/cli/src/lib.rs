//! Command-line front end. Reports go to stdout as JSON, diagnostics to
//! stderr. Exit codes: 0 success, 1 usage or I/O error, 2 numerical failure.

mod config;

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use demosaic_nas::baseline::demosaic_bilinear;
use demosaic_nas::imaging::{load_ppm, mosaic, sample_patches, save_ppm, BayerPattern, Image, PatchSet};
use demosaic_nas::metrics::{cpsnr_report, MetricsError};
use demosaic_nas::neuralnet::{
    count_params, demosaic_network, evaluate_patches, load_checkpoint, save_checkpoint, train, ArchDescriptor,
    ConvKind, NetError, Network, OptimizerKind, Schedule, TrainConfig,
};
use demosaic_nas::search::{
    exhaustive_search, pareto_front, read_ledger, write_csv, write_dat, Evaluator, LedgerEntry, SearchError,
    SearchOptions, StubEvaluator, TrainingEvaluator,
};
use serde_json::json;
use thiserror::Error;

pub use config::SearchConfig;

pub const SEED_ENV: &str = "DEMOSAIC_NAS_SEED";

#[derive(Debug, Parser)]
#[command(
    name = "demosaic-nas",
    version,
    about = "Bayer demosaicing and CNN architecture search"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Sample a full-colour PPM through a Bayer CFA (missing channels zero).
    Mosaic {
        input: PathBuf,
        output: PathBuf,
        #[arg(long, default_value = "RGGB")]
        pattern: BayerPattern,
    },
    /// Reconstruct a zero-filled mosaic PPM.
    Demosaic {
        input: PathBuf,
        output: PathBuf,
        /// `bilinear` or `net:<checkpoint>`.
        #[arg(long, default_value = "bilinear")]
        method: Method,
        /// CFA layout of the input (bilinear only).
        #[arg(long, default_value = "RGGB")]
        pattern: BayerPattern,
    },
    /// Score every `*.ppm` in REFS against the same-named file in ESTS.
    Eval { refs: PathBuf, ests: PathBuf },
    /// Cut random patches out of PPM images into a patch directory.
    Patches {
        #[arg(required = true)]
        images: Vec<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 1000)]
        count: usize,
        #[arg(long, default_value_t = 32)]
        size: usize,
        #[arg(long, env = SEED_ENV, default_value_t = 0)]
        seed: u64,
    },
    /// Train one architecture and save its checkpoint.
    Train(TrainArgs),
    /// Exhaustive search driven by a TOML config; resumes from its ledger.
    Search {
        config: PathBuf,
        /// Score architectures by parameter count instead of training them.
        #[arg(long)]
        stub_evaluator: bool,
        /// Concurrent trials.
        #[arg(long, default_value_t = 1)]
        jobs: usize,
        /// Overrides the config's ledger path.
        #[arg(long)]
        ledger: Option<PathBuf>,
    },
    /// Extract the Pareto front of a ledger as CSV (plus a gnuplot .dat file).
    Pareto {
        ledger: PathBuf,
        output: PathBuf,
        /// Defaults to OUTPUT with a `.dat` extension.
        #[arg(long)]
        dat: Option<PathBuf>,
    },
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long, default_value_t = 16)]
    pub filters: usize,
    #[arg(long, default_value_t = 3)]
    pub blocks: usize,
    #[arg(long, default_value = "standard")]
    pub conv_kind: ConvKind,
    #[arg(long, default_value_t = 1)]
    pub skip_length: usize,
    #[arg(long, default_value = "fixed")]
    pub schedule: Schedule,
    /// Training patch directory.
    #[arg(long)]
    pub train: PathBuf,
    /// Validation patch directory.
    #[arg(long)]
    pub valid: PathBuf,
    /// Checkpoint to write; per-epoch history goes next to it as `<stem>.history.jsonl`.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 1)]
    pub epochs: usize,
    #[arg(long, default_value_t = 8)]
    pub batch_size: usize,
    #[arg(long, default_value_t = 1e-4)]
    pub lr: f64,
    #[arg(long, default_value_t = 1e-8)]
    pub l2: f64,
    #[arg(long, default_value = "adam")]
    pub optimizer: OptimizerKind,
    /// Seeds both the weight init and the shuffling.
    #[arg(long, env = SEED_ENV, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Method {
    Bilinear,
    Net(PathBuf),
}

impl std::str::FromStr for Method {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s.split_once(':') {
            None if s == "bilinear" => Ok(Method::Bilinear),
            Some(("net", path)) if !path.is_empty() => Ok(Method::Net(PathBuf::from(path))),
            _ => Err(format!(
                "unknown method `{s}` (expected `bilinear` or `net:<checkpoint>`)"
            )),
        }
    }
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Io(String),
    #[error("{0}")]
    Numerical(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) | CliError::Io(_) => 1,
            CliError::Numerical(_) => 2,
        }
    }
}

impl From<NetError> for CliError {
    fn from(e: NetError) -> Self {
        match e {
            NetError::NonFiniteLoss | NetError::Diverged { .. } => CliError::Numerical(e.to_string()),
            NetError::Metrics(m) => m.into(),
            other => CliError::Io(other.to_string()),
        }
    }
}

impl From<MetricsError> for CliError {
    fn from(e: MetricsError) -> Self {
        match e {
            MetricsError::InfinitePsnr { .. } => CliError::Numerical(e.to_string()),
            other => CliError::Io(other.to_string()),
        }
    }
}

impl From<SearchError> for CliError {
    fn from(e: SearchError) -> Self {
        match e {
            SearchError::AllTrialsFailed => CliError::Numerical(e.to_string()),
            other => CliError::Io(other.to_string()),
        }
    }
}

impl From<demosaic_nas::imaging::ImagingError> for CliError {
    fn from(e: demosaic_nas::imaging::ImagingError) -> Self {
        CliError::Io(e.to_string())
    }
}

/// Parses `args` (program name first) and runs the command. Returns the
/// process exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            return if e.use_stderr() {
                let _ = write!(err, "{}", e.render());
                1
            } else {
                let _ = write!(out, "{}", e.render());
                0
            };
        }
    };
    match execute(cli.command, out, err) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            e.exit_code()
        }
    }
}

pub fn execute(command: Command, out: &mut dyn Write, err: &mut dyn Write) -> Result<(), CliError> {
    match command {
        Command::Mosaic { input, output, pattern } => {
            let img = load_ppm(&input)?;
            save_ppm(&mosaic(&img, pattern), &output)?;
            Ok(())
        }
        Command::Demosaic {
            input,
            output,
            method,
            pattern,
        } => {
            let m = load_ppm(&input)?;
            let img = match method {
                Method::Bilinear => demosaic_bilinear(&m, pattern).map_err(|e| CliError::Usage(e.to_string()))?,
                Method::Net(ckpt) => demosaic_network(&load_checkpoint(&ckpt)?, &m)?,
            };
            save_ppm(&img, &output)?;
            Ok(())
        }
        Command::Eval { refs, ests } => cmd_eval(&refs, &ests, out),
        Command::Patches {
            images,
            out: dir,
            count,
            size,
            seed,
        } => {
            let loaded = images
                .iter()
                .map(|p| Ok((p.display().to_string(), load_ppm(p)?)))
                .collect::<Result<Vec<_>, CliError>>()?;
            let sources: Vec<(&str, &Image)> = loaded.iter().map(|(n, i)| (n.as_str(), i)).collect();
            let set = sample_patches(&sources, count, size, seed)?;
            set.write_dir(&dir)?;
            writeln!(err, "wrote {} patches to {}", set.len(), dir.display()).ok();
            Ok(())
        }
        Command::Train(args) => cmd_train(&args, out, err),
        Command::Search {
            config,
            stub_evaluator,
            jobs,
            ledger,
        } => cmd_search(&config, stub_evaluator, jobs, ledger, out, err),
        Command::Pareto { ledger, output, dat } => cmd_pareto(&ledger, &output, dat.as_deref(), out),
    }
}

fn emit(out: &mut dyn Write, value: serde_json::Value) -> Result<(), CliError> {
    writeln!(out, "{value}").map_err(|e| CliError::Io(format!("stdout: {e}")))
}

pub fn cmd_eval(refs: &Path, ests: &Path, out: &mut dyn Write) -> Result<(), CliError> {
    let names = ppm_names(refs)?;
    if names.is_empty() {
        return Err(CliError::Io(format!("{}: no .ppm files", refs.display())));
    }
    let mut ref_imgs = Vec::with_capacity(names.len());
    let mut est_imgs = Vec::with_capacity(names.len());
    for name in &names {
        ref_imgs.push(load_ppm(refs.join(name))?);
        est_imgs.push(load_ppm(ests.join(name))?);
    }
    let report = cpsnr_report(&ref_imgs, &est_imgs)?;
    writeln!(out, "{}", report.to_json_line()).map_err(|e| CliError::Io(format!("stdout: {e}")))
}

fn ppm_names(dir: &Path) -> Result<Vec<String>, CliError> {
    let rd = fs::read_dir(dir).map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))?;
    let mut names = Vec::new();
    for entry in rd {
        let entry = entry.map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))?;
        let name = entry.file_name().to_string_lossy().into_owned();
        if name.ends_with(".ppm") {
            names.push(name);
        }
    }
    names.sort();
    Ok(names)
}

pub fn cmd_train(args: &TrainArgs, out: &mut dyn Write, err: &mut dyn Write) -> Result<(), CliError> {
    let arch = ArchDescriptor::new(
        args.filters,
        args.blocks,
        args.conv_kind,
        args.skip_length,
        args.schedule,
    );
    arch.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    let cfg = TrainConfig {
        lr: args.lr,
        l2: args.l2,
        epochs: args.epochs,
        batch_size: args.batch_size,
        seed: args.seed,
        optimizer: args.optimizer,
        ..Default::default()
    };
    cfg.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    let train_set = PatchSet::read_dir(&args.train)?;
    let valid_set = PatchSet::read_dir(&args.valid)?;
    let mut net = Network::build(arch, args.seed)?;
    let initial = evaluate_patches(&net, &valid_set.patches, cfg.pattern)?;
    writeln!(
        err,
        "{arch}: {} parameters, initial CPSNR {:.3} dB",
        count_params(&arch),
        initial.cpsnr
    )
    .ok();
    let history = train(&mut net, &train_set, &valid_set, &cfg)?;
    for h in &history {
        writeln!(
            err,
            "epoch {:>4}  loss {:.6e}  valid CPSNR {:.3} dB",
            h.epoch, h.train_loss, h.valid_cpsnr
        )
        .ok();
    }
    save_checkpoint(&net, &args.out)?;
    let history_path = args.out.with_extension("history.jsonl");
    let lines: String = history
        .iter()
        .map(|h| serde_json::to_string(h).expect("history serializes") + "\n")
        .collect();
    fs::write(&history_path, lines).map_err(|e| CliError::Io(format!("{}: {e}", history_path.display())))?;
    emit(
        out,
        json!({
            "arch": arch.key(),
            "complexity": count_params(&arch),
            "initial_cpsnr": initial.cpsnr,
            "history": history,
            "checkpoint": args.out.display().to_string(),
            "history_file": history_path.display().to_string(),
        }),
    )
}

pub fn cmd_search(
    config_path: &Path,
    stub: bool,
    jobs: usize,
    ledger_override: Option<PathBuf>,
    out: &mut dyn Write,
    err: &mut dyn Write,
) -> Result<(), CliError> {
    let cfg = SearchConfig::load(config_path)?;
    let space = cfg.space.enumerate();
    let ledger = ledger_override.unwrap_or_else(|| cfg.ledger_path());
    let opts = SearchOptions {
        budget: cfg.search.budget,
        ledger: Some(ledger.clone()),
        jobs,
    };
    let evaluator: Box<dyn Evaluator> = if stub {
        Box::new(StubEvaluator { seed: cfg.seed() })
    } else {
        let (train_dir, valid_dir) = cfg.data_dirs()?;
        let checkpoint_dir = cfg.checkpoint_dir();
        if let Some(dir) = &checkpoint_dir {
            fs::create_dir_all(dir).map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))?;
        }
        Box::new(TrainingEvaluator {
            train: PatchSet::read_dir(&train_dir)?,
            valid: PatchSet::read_dir(&valid_dir)?,
            config: cfg.train.clone(),
            seed: cfg.seed(),
            checkpoint_dir,
        })
    };
    writeln!(
        err,
        "searching {} architectures, ledger {}",
        opts.budget.unwrap_or(space.len()),
        ledger.display()
    )
    .ok();
    let outcome = exhaustive_search(&space, evaluator.as_ref(), &opts)?;
    for w in &outcome.warnings {
        writeln!(err, "warning: {w}").ok();
    }
    let failed: Vec<&LedgerEntry> = outcome.all.iter().filter(|e| e.trial().is_none()).collect();
    for f in &failed {
        writeln!(
            err,
            "warning: trial {} failed: {}",
            f.arch,
            f.error.as_deref().unwrap_or("unknown")
        )
        .ok();
    }
    writeln!(
        err,
        "evaluated {} new trials; best {} loss {}",
        outcome.evaluated, outcome.best.arch, outcome.best.loss
    )
    .ok();
    emit(
        out,
        json!({
            "best": LedgerEntry::success(&outcome.best),
            "trials": outcome.all.len(),
            "evaluated": outcome.evaluated,
            "failed": failed.len(),
            "ledger": ledger.display().to_string(),
        }),
    )
}

pub fn cmd_pareto(ledger: &Path, output: &Path, dat: Option<&Path>, out: &mut dyn Write) -> Result<(), CliError> {
    let (entries, warnings) = read_ledger(ledger)?;
    if !warnings.is_empty() {
        return Err(CliError::Io(warnings.join("; ")));
    }
    let trials: Vec<_> = entries.iter().filter_map(LedgerEntry::trial).collect();
    if trials.is_empty() {
        return Err(CliError::Io(format!("{}: no successful trials", ledger.display())));
    }
    let front = pareto_front(&trials);
    write_csv(&front, output)?;
    let dat_path = dat
        .map(Path::to_path_buf)
        .unwrap_or_else(|| output.with_extension("dat"));
    write_dat(&front, &dat_path)?;
    emit(
        out,
        json!({
            "trials": trials.len(),
            "front": front.len(),
            "csv": output.display().to_string(),
            "dat": dat_path.display().to_string(),
        }),
    )
}
