//! Command-line driver: single runs, population sweeps, coupled/decoupled
//! comparisons, oscillation diagnostics and physicality audits over stored
//! run directories.
//!
//! Exit codes: 0 success, 2 configuration or missing input, 3 runtime fault,
//! 4 invariant or audit failure.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use stefan_core::config::{load_config, ConfigError, ExperimentConfig};
use stefan_core::engine::EngineError;
use stefan_core::output::OutputError;
use stefan_core::HitScheme;

mod commands;
pub mod sweep;

pub use commands::{cmd_audit, cmd_compare, cmd_diagnose, cmd_run, cmd_sweep};

pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_RUNTIME: i32 = 3;
pub const EXIT_INVARIANT: i32 = 4;

#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    pub fn config(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_CONFIG,
            message: message.into(),
        }
    }

    pub fn runtime(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_RUNTIME,
            message: message.into(),
        }
    }

    pub fn invariant(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_INVARIANT,
            message: message.into(),
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.message)
    }
}

impl From<EngineError> for CliError {
    fn from(e: EngineError) -> Self {
        match e {
            EngineError::Config(_) => Self::config(e.to_string()),
            _ => Self::runtime(e.to_string()),
        }
    }
}

impl From<OutputError> for CliError {
    fn from(e: OutputError) -> Self {
        Self::runtime(e.to_string())
    }
}

pub fn config_error(path: &Path, e: ConfigError) -> CliError {
    CliError::config(format!("{}: {e}", path.display()))
}

#[derive(Debug, Parser)]
#[command(
    name = "stefan",
    version,
    about = "Particle simulator for coupled supercooled Stefan systems"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct RunArgs {
    /// Experiment config (TOML).
    #[arg(long)]
    pub config: PathBuf,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
    /// Override the config seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker threads.
    #[arg(long, default_value_t = 1)]
    pub workers: usize,
    /// Override the hit-detection scheme.
    #[arg(long, value_parser = parse_scheme)]
    pub scheme: Option<HitScheme>,
}

#[derive(Debug, Clone, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub run: RunArgs,
    /// Population sizes, e.g. `250,1000,4000` (default: the config's `N_list`).
    #[arg(long, value_delimiter = ',')]
    pub n_list: Option<Vec<usize>>,
    /// Number of seeds per population size, starting at the base seed
    /// (default: the config's `seeds`, or 1).
    #[arg(long)]
    pub seeds: Option<usize>,
    /// Number of jump-free probe times.
    #[arg(long, default_value_t = 5)]
    pub probes: usize,
}

#[derive(Debug, Clone, Args)]
pub struct DiagnoseArgs {
    /// Directory holding run directories (searched recursively).
    #[arg(long)]
    pub runs: PathBuf,
    /// Where to write `oscillations.csv` (default: `--runs`).
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_delimiter = ',', default_values_t = [0.1, 0.25, 0.5])]
    pub r: Vec<f64>,
    #[arg(long, value_delimiter = ',', default_values_t = [0.0025, 0.01, 0.04])]
    pub delta: Vec<f64>,
    #[arg(long, value_delimiter = ',', default_values_t = [0.25, 0.5])]
    pub t: Vec<f64>,
    /// Allowed excess of the empirical frequency over the bound, in binomial
    /// standard errors.
    #[arg(long, default_value_t = 3.0)]
    pub sigmas: f64,
}

#[derive(Debug, Clone, Args)]
pub struct AuditArgs {
    /// Directory holding run directories (searched recursively).
    #[arg(long)]
    pub runs: PathBuf,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run one simulation and write its outputs.
    Run(RunArgs),
    /// Run every (N, seed) pair and write convergence diagnostics.
    Sweep(SweepArgs),
    /// Run a config and its decoupled counterpart on identical noise.
    Compare(RunArgs),
    /// Oscillation tail frequencies against the analytic bound.
    Diagnose(DiagnoseArgs),
    /// Recompute every qualifying jump from its stored pre-jump measure.
    Audit(AuditArgs),
}

fn parse_scheme(s: &str) -> Result<HitScheme, String> {
    s.parse()
}

pub fn execute(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Run(a) => cmd_run(&a),
        Command::Sweep(a) => cmd_sweep(&a),
        Command::Compare(a) => cmd_compare(&a),
        Command::Diagnose(a) => cmd_diagnose(&a),
        Command::Audit(a) => cmd_audit(&a),
    }
}

/// Loads a config and applies the seed and scheme overrides.
pub fn load_experiment(args: &RunArgs) -> Result<ExperimentConfig, CliError> {
    let mut exp = load_config(&args.config).map_err(|e| config_error(&args.config, e))?;
    if let Some(seed) = args.seed {
        exp.simulation.seed = seed;
    }
    if let Some(scheme) = args.scheme {
        exp.simulation.scheme = scheme;
    }
    if args.workers == 0 {
        return Err(CliError::config("--workers must be at least 1"));
    }
    Ok(exp)
}

/// Every directory under `root` (including `root`) that holds a
/// `manifest.json`, sorted by path.
pub fn find_runs(root: &Path) -> Result<Vec<PathBuf>, CliError> {
    if !root.is_dir() {
        return Err(CliError::config(format!(
            "{} is not a directory",
            root.display()
        )));
    }
    let mut out = Vec::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        if dir.join("manifest.json").is_file() {
            out.push(dir.clone());
        }
        let entries = std::fs::read_dir(&dir)
            .map_err(|e| CliError::runtime(format!("{}: {e}", dir.display())))?;
        for entry in entries.flatten() {
            if entry.file_type().map(|t| t.is_dir()).unwrap_or(false) {
                stack.push(entry.path());
            }
        }
    }
    out.sort();
    if out.is_empty() {
        return Err(CliError::config(format!(
            "no run directories (manifest.json) under {}",
            root.display()
        )));
    }
    Ok(out)
}
