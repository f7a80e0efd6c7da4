//! Config-driven runner for the `extnlw` solver: parses run documents, executes
//! experiments and writes CSV, JSON and checkpoint outputs with a checksummed
//! manifest.

use std::path::PathBuf;

use clap::{Parser, Subcommand};
use thiserror::Error;

pub mod checkpoint;
pub mod commands;
pub mod config;
pub mod manifest;

pub use config::{parse_config, RunConfig};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("parse error: {0}")]
    Parse(String),

    #[error("{key}: {message}")]
    Validation { key: String, message: String },

    #[error("{0}")]
    Numerical(extnlw::Error),

    #[error("{0}")]
    Solver(extnlw::Error),

    #[error("self-check failed: {0}")]
    Check(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<extnlw::Error> for CliError {
    fn from(e: extnlw::Error) -> Self {
        use extnlw::Error as E;
        match e {
            E::NumericalFailure { .. } | E::Overflow(_) | E::DomainOfDependence(_) => CliError::Numerical(e),
            other => CliError::Solver(other),
        }
    }
}

impl CliError {
    /// 2 for configuration problems, 3 for numerical failures.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Numerical(_) | CliError::Check(_) => 3,
            CliError::Io(_) => 1,
            _ => 2,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Parse(_) => "parse",
            CliError::Validation { .. } => "validation",
            CliError::Numerical(_) | CliError::Check(_) => "numerical",
            CliError::Solver(_) => "configuration",
            CliError::Io(_) => "io",
        }
    }

    pub fn failure_time(&self) -> Option<f64> {
        match self {
            CliError::Numerical(extnlw::Error::NumericalFailure { t, .. }) => Some(*t),
            _ => None,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "extnlw", version, about = "Radial defocusing wave experiments outside the unit ball")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, clap::Args)]
pub struct Common {
    /// JSON run document.
    #[arg(long, short)]
    pub config: Option<PathBuf>,
    /// Output directory (overrides `out` in the config).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Overwrite an existing run directory.
    #[arg(long)]
    pub force: bool,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Transform, Plancherel and linear-flow invariants.
    Selftest(Common),
    /// Evolve the full equation and write the time series.
    Simulate {
        #[command(flatten)]
        common: Common,
        /// Write a checkpoint every K steps.
        #[arg(long, value_name = "K")]
        checkpoint_every: Option<usize>,
        /// Continue from a checkpoint file.
        #[arg(long, value_name = "FILE")]
        resume: Option<PathBuf>,
    },
    /// Frequency-truncation experiment over the configured J values.
    Truncation(Common),
    /// Radial Sobolev and Bernstein checks.
    Inequalities(Common),
    /// Dispersive decay fits for bump data.
    Decay(Common),
}

/// Runs a parsed command line and returns the process exit code.
pub fn run(cli: Cli) -> u8 {
    match commands::dispatch(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("extnlw: {e}");
            e.exit_code()
        }
    }
}
