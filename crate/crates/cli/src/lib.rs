//! Command implementations behind the `lsgpr` binary.

pub mod commands;
pub mod config;

use std::process::ExitCode;

pub use commands::{cmd_benchmark, cmd_embed, cmd_fit, cmd_predict, cmd_simulate};
pub use config::{BenchmarkSpec, Cell, CommonArgs, Inputs, RunConfig};

/// Failures, grouped by exit status.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    /// Bad input or configuration (exit 1).
    #[error("{0}")]
    Validation(String),
    /// A numerical routine failed (exit 2).
    #[error("{0}")]
    Numerical(String),
    /// Some benchmark replicates failed; the rest were written (exit 3).
    #[error("{0}")]
    Partial(String),
}

impl CliError {
    pub fn exit_code(&self) -> ExitCode {
        ExitCode::from(match self {
            CliError::Validation(_) => 1,
            CliError::Numerical(_) => 2,
            CliError::Partial(_) => 3,
        })
    }
}

impl From<lsgpr::Error> for CliError {
    fn from(e: lsgpr::Error) -> Self {
        if e.is_numerical() {
            CliError::Numerical(e.to_string())
        } else {
            CliError::Validation(e.to_string())
        }
    }
}
