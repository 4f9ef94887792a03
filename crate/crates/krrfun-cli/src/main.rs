//! `krrfun` command line: fit kernel ridge models, compute functional
//! estimates with exact variances and confidence intervals, locate optima,
//! and run seeded simulation studies that emit plot-ready CSV.

mod commands;
mod config;
mod csvio;
mod model;

use std::fmt;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

/// Errors carrying their process exit code: 2 config, 3 data, 4 numerical.
#[derive(Debug)]
pub enum CliError {
    Config(String),
    Data(String),
    Numerical(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Data(_) => 3,
            CliError::Numerical(_) => 4,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "config error: {m}"),
            CliError::Data(m) => write!(f, "data error: {m}"),
            CliError::Numerical(m) => write!(f, "numerical error: {m}"),
        }
    }
}

#[derive(Parser)]
#[command(
    name = "krrfun",
    about = "Kernel ridge regression: functional inference, optima, and simulation studies",
    version
)]
struct Cli {
    /// JSON config document for the chosen subcommand
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Override the config's random seed
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads for replication-level parallelism
    #[arg(long, global = true, default_value_t = 1)]
    workers: usize,
    /// Output directory for generated files
    #[arg(long, global = true, default_value = ".")]
    out: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit a model from a dataset CSV and print a summary
    Fit,
    /// Estimate linear functionals with variances and confidence intervals
    Infer,
    /// Locate the regression function's optimum with a plug-in CI
    Optimum,
    /// Run a replicated simulation scenario and emit coverage reports
    Simulate,
    /// Run a convergence-rate experiment and emit a rate table
    Rates,
    /// Emit Q-Q data for standardized statistics from a scenario
    Qq,
}

fn run(cli: &Cli) -> Result<(), CliError> {
    let config_path = cli
        .config
        .as_deref()
        .ok_or_else(|| CliError::Config("--config is required".to_string()))?;
    std::fs::create_dir_all(&cli.out)
        .map_err(|e| CliError::Data(format!("cannot create {}: {e}", cli.out.display())))?;
    let workers = cli.workers.max(1);
    match cli.command {
        Command::Fit => commands::cmd_fit(&config::load(config_path)?, &cli.out),
        Command::Infer => commands::cmd_infer(&config::load(config_path)?, &cli.out),
        Command::Optimum => commands::cmd_optimum(&config::load(config_path)?, &cli.out),
        Command::Simulate => {
            commands::cmd_simulate(&config::load(config_path)?, cli.seed, workers, &cli.out)
        }
        Command::Rates => commands::cmd_rates(&config::load(config_path)?, cli.seed, &cli.out),
        Command::Qq => commands::cmd_qq(&config::load(config_path)?, cli.seed, workers, &cli.out),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(e.exit_code())
        }
    }
}
