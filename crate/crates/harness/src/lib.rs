//! Experiment registry and output plumbing for the lattice Nelson model.

pub mod config;
pub mod experiments;
pub mod output;

use nelson_core::observables::ExperimentResult;
use thiserror::Error;

pub use config::{InitialData, RunConfig};
pub use experiments::{find, run_experiment, run_many, Experiment, Group, REGISTRY};
pub use output::emit_report;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("unknown experiment {0:?}")]
    UnknownExperiment(String),
    #[error(transparent)]
    Core(#[from] nelson_core::Error),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl HarnessError {
    /// Process exit code: 2 for configuration problems, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Config(_) | HarnessError::UnknownExperiment(_) => 2,
            _ => 1,
        }
    }
}

/// Outcome of one registry entry; a numerical error is kept as a failed run.
#[derive(Debug)]
pub struct Outcome {
    pub name: &'static str,
    pub result: Result<ExperimentResult, String>,
}

impl Outcome {
    pub fn passed(&self) -> bool {
        matches!(&self.result, Ok(r) if r.passed())
    }
}
