//! Command-line front end: reads a TOML run configuration, dispatches a
//! solve, and writes CSV/JSON artifacts.

pub mod commands;
pub mod config;
pub mod output;

use std::path::PathBuf;

use clap::{Parser, ValueEnum};
use thiserror::Error;

use shortfall_core::baseline::BaselineError;
use shortfall_core::cvar::CvarError;
use shortfall_core::mv::MvError;
use shortfall_core::sim::SimError;
use shortfall_core::{LpmError, MarketError};

pub use commands::run;
pub use config::{Overrides, RunConfig};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("infeasible: {0}")]
    Infeasible(String),
    #[error("solver failure: {0}")]
    Solver(String),
    #[error("i/o error: {0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Solver(_) | CliError::Io(_) => 1,
            CliError::Infeasible(_) => 2,
            CliError::Config(_) => 3,
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

impl From<MarketError> for CliError {
    fn from(e: MarketError) -> Self {
        CliError::Config(e.to_string())
    }
}

impl From<LpmError> for CliError {
    fn from(e: LpmError) -> Self {
        match e {
            LpmError::TargetTooHigh { .. } | LpmError::InfeasibleBudget { .. } => {
                CliError::Infeasible(e.to_string())
            }
            LpmError::InvalidProblem(_) => CliError::Config(e.to_string()),
            _ => CliError::Solver(e.to_string()),
        }
    }
}

impl From<CvarError> for CliError {
    fn from(e: CvarError) -> Self {
        match e {
            CvarError::TargetTooHigh { .. } => CliError::Infeasible(e.to_string()),
            CvarError::InvalidProblem(_) => CliError::Config(e.to_string()),
            CvarError::Lpm(inner) => inner.into(),
            CvarError::Search(_) => CliError::Solver(e.to_string()),
        }
    }
}

impl From<MvError> for CliError {
    fn from(e: MvError) -> Self {
        match e {
            MvError::InvalidProblem(_) => CliError::Config(e.to_string()),
            _ => CliError::Solver(e.to_string()),
        }
    }
}

impl From<BaselineError> for CliError {
    fn from(e: BaselineError) -> Self {
        match e {
            BaselineError::InvalidInput(_) => CliError::Config(e.to_string()),
            BaselineError::Lp(_) => CliError::Solver(e.to_string()),
        }
    }
}

impl From<SimError> for CliError {
    fn from(e: SimError) -> Self {
        CliError::Config(e.to_string())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Command {
    Solve,
    PolicyTable,
    Frontier,
    Simulate,
    CompareStatic,
}

#[derive(Debug, Parser)]
#[command(
    name = "shortfall",
    version,
    about = "Dynamic mean-downside-risk portfolio solver"
)]
pub struct Cli {
    /// TOML run configuration.
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long, value_enum, default_value = "solve")]
    pub cmd: Command,
    #[arg(long)]
    pub q: Option<f64>,
    #[arg(long)]
    pub beta: Option<f64>,
    #[arg(long)]
    pub d: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub paths: Option<usize>,
    #[arg(long)]
    pub steps: Option<usize>,
    #[arg(long)]
    pub scenarios: Option<usize>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

impl Cli {
    pub fn overrides(&self) -> Overrides {
        Overrides {
            q: self.q,
            beta: self.beta,
            d: self.d,
            seed: self.seed,
            paths: self.paths,
            steps: self.steps,
            scenarios: self.scenarios,
            out: self.out.clone(),
        }
    }
}
