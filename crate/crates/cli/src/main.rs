//! `cascade`: simulation, noise sensitivity and pulse optimization for
//! cascaded two-cavity state transfer.

#![allow(clippy::neg_cmp_op_on_partial_ord)] // `!(x > y)` also rejects NaN

mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use cascade_core::error::ErrorCategory;
use clap::{Parser, Subcommand};
use serde_json::json;
use thiserror::Error;

use config::{ConfigError, RunConfig};
use output::Output;

#[derive(Debug, Parser)]
#[command(name = "cascade", version, about = "Cascaded cavity state transfer: simulate, score and optimize pulses")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Run configuration (`key = value` per line).
    #[arg(long, short, global = true)]
    config: Option<PathBuf>,

    /// Override a configuration key, e.g. `--set n=6`. May be repeated.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    overrides: Vec<String>,

    /// Output directory; takes precedence over the config file.
    #[arg(long, env = "CASCADE_OUTPUT_DIR", global = true)]
    output_dir: Option<PathBuf>,

    /// Worker threads for `sweep` (default: all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Trajectory and master-equation evolution for one pulse.
    Simulate,
    /// Noise sensitivities of one pulse.
    Sensitivity,
    /// Optimize a sampled pulse at one end time.
    Optimize,
    /// Optimize at every end time in `end_times`.
    Sweep,
    /// Fit `a + b/(c + T)` to a sweep table.
    Fit,
    /// Quick numerical self-checks.
    Selftest,
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Core(#[from] cascade_core::Error),
    #[error("{0}")]
    Io(String),
    #[error("self-test failed")]
    SelfTest,
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) | CliError::Io(_) => 2,
            CliError::Core(e) => match e.category() {
                ErrorCategory::Input => 2,
                ErrorCategory::Numeric => 3,
                ErrorCategory::Infeasible => 4,
            },
            CliError::SelfTest => 3,
        }
    }

    fn tag(&self) -> &'static str {
        match self {
            CliError::Config(_) => "config",
            CliError::Core(e) => e.tag(),
            CliError::Io(_) => "io",
            CliError::SelfTest => "selftest",
        }
    }
}

fn load_config(cli: &Cli) -> Result<RunConfig, CliError> {
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    let cwd = PathBuf::from(".");
    for item in &cli.overrides {
        let (key, value) = item
            .split_once('=')
            .ok_or_else(|| ConfigError::Key { key: item.clone(), message: "expected KEY=VALUE".into() })?;
        cfg.set(key.trim(), value.trim(), &cwd)
            .map_err(|message| ConfigError::Key { key: key.trim().to_string(), message })?;
    }
    if let Some(dir) = &cli.output_dir {
        cfg.output_dir = dir.clone();
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run(cli: &Cli) -> Result<(), CliError> {
    let cfg = load_config(cli)?;
    if let Some(jobs) = cli.jobs {
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs.max(1))
            .build_global()
            .map_err(|e| CliError::Io(format!("cannot start worker pool: {e}")))?;
    }
    let out = Output::new(&cfg.output_dir, cfg.hash(), cfg.csv, cfg.json)?;
    match cli.command {
        Command::Simulate => commands::simulate(&cfg, &out),
        Command::Sensitivity => commands::sensitivity(&cfg, &out),
        Command::Optimize => commands::optimize_cmd(&cfg, &out),
        Command::Sweep => commands::sweep(&cfg, &out),
        Command::Fit => commands::fit(&cfg, &out),
        Command::Selftest => commands::selftest(&out),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            let code = err.exit_code();
            let doc = json!({ "error": { "kind": err.tag(), "exit_code": code, "message": err.to_string() } });
            eprintln!("{doc}");
            ExitCode::from(code)
        }
    }
}
