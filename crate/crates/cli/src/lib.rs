//! Library half of the `bhc` binary: configuration, commands and the
//! mapping from failures to exit codes.

pub mod commands;
pub mod config;

use bhc_core::BhcError;
use thiserror::Error;

pub use commands::{Command, ReportArgs, RunArgs};
pub use config::{Mode, RunConfig};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config: {0}")]
    Config(String),
    #[error("stage {stage}: {source}")]
    Pipeline {
        stage: &'static str,
        source: BhcError,
    },
    #[error("tolerance: {0}")]
    Tolerance(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Pipeline { .. } => 3,
            CliError::Tolerance(_) => 4,
        }
    }
}

/// Tags a core failure with the stage it came from.
pub(crate) fn stage(stage: &'static str) -> impl FnOnce(BhcError) -> CliError {
    move |source| CliError::Pipeline { stage, source }
}

pub fn run(command: Command) -> Result<(), CliError> {
    match command {
        Command::Reconstruct(a) => commands::reconstruct(&a),
        Command::Compare(a) => commands::compare(&a),
        Command::Report(a) => commands::report(&a),
        Command::Sample(a) => commands::sample(&a),
    }
}
