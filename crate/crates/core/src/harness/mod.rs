//! Configured experiments: seeded replications, occurrence statistics and
//! result emission.

pub mod config;
pub mod emit;
pub mod run;

use thiserror::Error;

pub use config::{ExperimentConfig, OutputFormat, Scenario};
pub use emit::{emit, render};
pub use run::{run_replications, OccurrenceStats, ResultRow, RunResult};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("{0}")]
    Runtime(String),
}

impl HarnessError {
    /// Process exit code: 2 for usage and configuration errors, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Config(_) => 2,
            HarnessError::Io(_) | HarnessError::Runtime(_) => 1,
        }
    }
}
