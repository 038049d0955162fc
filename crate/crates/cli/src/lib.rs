//! Batch front end for `mfpsrl-core`: scenario files in, CSV/JSON traces out.

pub mod commands;
pub mod export;
pub mod scenario;

pub use commands::{cmd_run, cmd_verify, load_run, LoadedRun};
pub use export::export_results;
pub use scenario::{load_scenario, Overrides, ScenarioFile};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum CliError {
    #[error("usage: {0}")]
    Usage(String),
    #[error("invalid scenario: {0}")]
    Scenario(String),
    #[error("{0}")]
    Runtime(String),
    #[error("not a mean-field equilibrium at the requested tolerance")]
    VerificationFailed,
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Scenario(_) => 3,
            CliError::Runtime(_) => 4,
            CliError::VerificationFailed => 5,
        }
    }
}
