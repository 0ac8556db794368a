//! `cognoise`: design, simulate, fit, compare and report from the shell.
//!
//! Exit codes: 0 success, 2 configuration error, 3 data error, 4 sampler
//! diagnostic failure. Failures print `{"error": {...}}` on stderr.

mod commands;
mod config;
mod error;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use crate::config::RunConfig;
use crate::error::{CliError, CliResult};

#[derive(Debug, Parser)]
#[command(name = "cognoise", version, about = "Noisy-cognition choice models: design, simulation, estimation, comparison")]
struct Cli {
    /// Master seed; required by `simulate` and `fit`.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory (created if missing).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// JSON run configuration; flags take precedence.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Worker threads for chains and simulation.
    #[arg(long, global = true, env = "COGNOISE_THREADS")]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write the trial schedule of both tasks to trials.csv.
    Design(commands::design::Args),
    /// Choice curves over a log-spaced ratio grid.
    Curves(commands::curves::Args),
    /// Simulate a population and its choices (choices.csv, truth.json).
    Simulate(commands::simulate::Args),
    /// Fit a model variant to a choices file.
    Fit(commands::fit::Args),
    /// WAIC comparison of fits sharing one data file.
    Compare(commands::compare::Args),
    /// Score a fit against the truth that generated its data.
    Recover(commands::recover::Args),
    /// Markdown report of a fit.
    Report(commands::report::Args),
}

/// Global settings shared by every subcommand.
pub struct Context {
    pub seed: Option<u64>,
    pub out: PathBuf,
    pub config: RunConfig,
}

impl Context {
    pub fn require_seed(&self, command: &str) -> CliResult<u64> {
        self.seed
            .ok_or_else(|| CliError::config(format!("`{command}` needs a seed (--seed or \"seed\" in the config)")))
    }

    /// Creates the output directory and returns `out/name`.
    pub fn output(&self, name: &str) -> CliResult<PathBuf> {
        std::fs::create_dir_all(&self.out)
            .map_err(|e| CliError::data(format!("cannot create {}: {e}", self.out.display())))?;
        Ok(self.out.join(name))
    }
}

fn run(cli: Cli) -> CliResult<()> {
    let config = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(n) = cli.threads.or(config.threads) {
        if n == 0 {
            return Err(CliError::config("--threads must be at least 1"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::config(e.to_string()))?;
    }
    let ctx = Context {
        seed: cli.seed.or(config.seed),
        out: cli.out.clone().or_else(|| config.out.clone()).unwrap_or_else(|| PathBuf::from(".")),
        config,
    };
    match cli.command {
        Command::Design(a) => commands::design::run(&ctx, a),
        Command::Curves(a) => commands::curves::run(&ctx, a),
        Command::Simulate(a) => commands::simulate::run(&ctx, a),
        Command::Fit(a) => commands::fit::run(&ctx, a),
        Command::Compare(a) => commands::compare::run(&ctx, a),
        Command::Recover(a) => commands::recover::run(&ctx, a),
        Command::Report(a) => commands::report::run(&ctx, a),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            // --help and --version.
            print!("{e}");
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let err = CliError::config(e.to_string().trim_end());
            eprintln!("{}", err.to_json());
            return ExitCode::from(err.code as u8);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("{}", err.to_json());
            ExitCode::from(err.code as u8)
        }
    }
}
