//! Scenario-driven front end: `solve`, `dnmap`, `probe`, `reconstruct`,
//! `sweep` and `validate` on a TOML scenario, with cached operators and a
//! manifest per run.
//!
//! Exit status: 0 on success, 2 for configuration errors, 3 for numerical
//! failures and failed validation checks, 1 for I/O errors.

pub mod commands;
pub mod config;
pub mod store;

use std::path::PathBuf;

use clap::{Parser, Subcommand};

pub use config::ScenarioConfig;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config: {0}")]
    Config(String),
    #[error("{module}: {source}")]
    Numerical { module: &'static str, source: crackprobe::Error },
    #[error("validation failed: {0}")]
    Check(String),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn numerical(module: &'static str, source: crackprobe::Error) -> Self {
        Self::Numerical { module, source }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Numerical { .. } | CliError::Check(_) => 3,
            CliError::Io(_) => 1,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "crackprobe", version, about = "Impedance-crack forward solver, boundary maps and probe reconstruction")]
pub struct Cli {
    /// Scenario file; the bundled default scenario when absent.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Output directory; overrides the scenario's `output`.
    #[arg(long, global = true, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// Worker threads.
    #[arg(long, global = true, value_name = "N")]
    pub threads: Option<usize>,
    /// Neither read nor write cached operators.
    #[arg(long, global = true)]
    pub no_cache: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Forward solves for the crack-free and cracked configurations.
    Solve,
    /// Boundary maps of every configuration, written as operator archives.
    Dnmap,
    /// Blow-up profiles of the probe function along the configured paths.
    Probe,
    /// Crack reconstruction from the measured and crack-free maps.
    Reconstruct,
    /// Stability sweep over the configured crack family.
    Sweep,
    /// Invariant checks: forward accuracy, selfadjointness, identity,
    /// formula equivalence, asymptotics, positivity.
    Validate,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Solve => "solve",
            Command::Dnmap => "dnmap",
            Command::Probe => "probe",
            Command::Reconstruct => "reconstruct",
            Command::Sweep => "sweep",
            Command::Validate => "validate",
        }
    }
}

/// Loads the scenario, runs the command and returns the manifest path.
pub fn run(cli: &Cli) -> Result<PathBuf, CliError> {
    let cfg = match &cli.config {
        Some(p) => ScenarioConfig::parse(&std::fs::read_to_string(p)?)?,
        None => ScenarioConfig::default_scenario(),
    };
    let out = cli.out.clone().or_else(|| cfg.output.clone()).unwrap_or_else(|| PathBuf::from("crackprobe-out"));
    let cache = (!cli.no_cache).then(|| store::Cache::default_dir(&out));
    let go = || commands::run_command(cli.command, cfg, out, store::Cache::new(cache));
    match cli.threads {
        None => go(),
        Some(0) => Err(CliError::Config("field `threads` out of range: must be positive".into())),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| CliError::Config(format!("thread pool: {e}")))?
            .install(go),
    }
}
