//! Command-line front end: scenario generation, training, evaluation,
//! replay reports and gradient checks. Every run writes a `manifest.json`
//! that is enough to reproduce it.

pub mod commands;
pub mod config;
pub mod manifest;
pub mod report;
pub mod svg;

use anyhow::Result;
use clap::{Args, Parser, Subcommand};
use commands::{execute, CommandKind, Inputs};
use config::{Algo, Baseline, RunConfig};
use gdpsim_core::agents::AgentError;
use gdpsim_core::data::DataError;
use gdpsim_core::env::EnvError;
use gdpsim_core::gen::{DatasetError, GenError};
use gdpsim_core::nn::NnError;
use manifest::RunManifest;
use std::fmt;
use std::path::{Path, PathBuf};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INVALID: i32 = 1;
pub const EXIT_INTERNAL: i32 = 2;
pub const LOG_ENV: &str = "SAGDP_LOG_LEVEL";

/// Bad user input: flags, config files, or input files.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Invalid(pub String);

impl fmt::Display for Invalid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Invalid {}

#[derive(Debug, Parser)]
#[command(
    name = "gdpsim",
    version,
    about = "Ground delay program simulator and offline agents"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate scenarios and an expert dataset.
    Gen(Common),
    /// Train an agent on a dataset.
    Train(Common),
    /// Evaluate a checkpoint or baseline on generated scenarios.
    Eval(Common),
    /// Roll one scenario and write a delay report.
    Replay(Common),
    /// Compare backprop against finite differences.
    GradCheck(Common),
    /// Re-run a recorded invocation from its manifest.
    Rerun {
        /// Manifest file or run directory.
        manifest: PathBuf,
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    /// JSON run configuration; flags below override it.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
    #[arg(long, value_enum)]
    pub algo: Option<Algo>,
    /// Conservative penalty weight (CQL).
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub n_iter: Option<usize>,
    #[arg(long)]
    pub eval_batch_size: Option<usize>,
    #[arg(long)]
    pub n_scenarios: Option<usize>,
    /// `oracle` or `constant:N`.
    #[arg(long)]
    pub baseline: Option<Baseline>,
    /// Dataset file, or a `gen` output directory.
    #[arg(long)]
    pub data: Option<PathBuf>,
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    /// Scenario directory with flights.csv, airport_quarters.csv and gdp_advisories.csv.
    #[arg(long)]
    pub scenario: Option<PathBuf>,
}

impl Common {
    /// Loads `--config`, applies flag overrides, resolves seeds and validates.
    pub fn run_config(&self) -> Result<RunConfig> {
        let mut c = match &self.config {
            Some(p) => {
                let bytes = manifest::read_bytes(p)?;
                serde_json::from_slice(&bytes).map_err(|e| Invalid(format!("bad config {}: {e}", p.display())))?
            }
            None => RunConfig::default(),
        };
        if let Some(v) = self.seed {
            c.seed = v;
        }
        if let Some(v) = self.algo {
            c.algo = v;
        }
        if let Some(v) = self.alpha {
            c.cql.alpha = v;
        }
        if let Some(v) = self.n_iter {
            c.train.n_iter = v;
        }
        if let Some(v) = self.eval_batch_size {
            c.train.eval_batch_size = v;
        }
        if let Some(v) = self.n_scenarios {
            c.n_scenarios = v;
        }
        if let Some(v) = self.baseline {
            c.baseline = Some(v);
        }
        let c = c.resolve();
        c.validate().map_err(Invalid)?;
        Ok(c)
    }

    fn inputs(&self) -> Inputs {
        Inputs {
            data: self.data.clone(),
            checkpoint: self.checkpoint.clone(),
            scenario: self.scenario.clone(),
        }
    }
}

/// Re-executes a recorded run after checking its config hash and inputs.
pub fn rerun_from_manifest(manifest: &Path, out: &Path) -> Result<()> {
    let m = RunManifest::load(manifest)?;
    m.verify_inputs()?;
    let cmd = CommandKind::from_name(&m.command).ok_or_else(|| Invalid(format!("unknown command {:?}", m.command)))?;
    m.config.validate().map_err(Invalid)?;
    execute(cmd, &m.config, &Inputs::from_manifest(&m), out, m.argv.clone())
}

/// 1 for bad input anywhere in the chain, 2 otherwise.
pub fn exit_code(err: &anyhow::Error) -> i32 {
    for cause in err.chain() {
        if cause.is::<Invalid>() || cause.is::<serde_json::Error>() || cause.is::<DataError>() {
            return EXIT_INVALID;
        }
        if let Some(e) = cause.downcast_ref::<GenError>() {
            return match e {
                GenError::Data(_) | GenError::InvalidConfig(_) | GenError::InvalidBin(_) | GenError::NoRunways => {
                    EXIT_INVALID
                }
            };
        }
        if let Some(e) = cause.downcast_ref::<EnvError>() {
            return match e {
                EnvError::InvalidScenario(_) | EnvError::InvalidAction(_) => EXIT_INVALID,
                _ => EXIT_INTERNAL,
            };
        }
        if let Some(e) = cause.downcast_ref::<NnError>() {
            return match e {
                NnError::InvalidSpec(_) | NnError::Checkpoint(_) => EXIT_INVALID,
                _ => EXIT_INTERNAL,
            };
        }
        if let Some(e) = cause.downcast_ref::<DatasetError>() {
            return match e {
                DatasetError::Format(_) | DatasetError::Empty => EXIT_INVALID,
                DatasetError::Env(_) | DatasetError::Io(_) => EXIT_INTERNAL,
            };
        }
        if let Some(e) = cause.downcast_ref::<AgentError>() {
            match e {
                AgentError::EmptyDataset | AgentError::InvalidConfig(_) | AgentError::Checkpoint(_) => {
                    return EXIT_INVALID
                }
                // wrapped core errors are classified on the next link
                AgentError::Nn(_) | AgentError::Env(_) | AgentError::Gen(_) => continue,
                AgentError::Io(_) => return EXIT_INTERNAL,
            }
        }
    }
    EXIT_INTERNAL
}

fn init_logging() {
    let env = env_logger::Env::new().filter_or(LOG_ENV, "warn");
    let _ = env_logger::Builder::from_env(env).try_init();
}

/// Parses `argv` (including the program name), runs, and returns the exit code.
pub fn run_command<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    init_logging();
    let argv: Vec<std::ffi::OsString> = argv.into_iter().map(Into::into).collect();
    let cli = match Cli::try_parse_from(&argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_INVALID } else { EXIT_OK };
        }
    };
    let argv: Vec<String> = argv.iter().map(|a| a.to_string_lossy().into_owned()).collect();
    let result = match &cli.command {
        Command::Rerun { manifest, out } => rerun_from_manifest(manifest, out),
        Command::Gen(c) => run(CommandKind::Gen, c, argv),
        Command::Train(c) => run(CommandKind::Train, c, argv),
        Command::Eval(c) => run(CommandKind::Eval, c, argv),
        Command::Replay(c) => run(CommandKind::Replay, c, argv),
        Command::GradCheck(c) => run(CommandKind::GradCheck, c, argv),
    };
    match result {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e:#}");
            exit_code(&e)
        }
    }
}

fn run(cmd: CommandKind, common: &Common, argv: Vec<String>) -> Result<()> {
    let config = common.run_config()?;
    execute(cmd, &config, &common.inputs(), &common.out, argv)
}
