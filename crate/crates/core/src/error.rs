use thiserror::Error;

use crate::game::ValidationReport;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid game specification: {0}")]
    InvalidSpec(ValidationReport),

    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),

    #[error("dimension mismatch: expected {expected}, got {actual} ({what})")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        actual: usize,
    },

    #[error("action {action} is not feasible in state {state}")]
    InfeasibleAction { state: usize, action: usize },

    #[error("index out of range: {what} {index} (size {size})")]
    OutOfRange {
        what: &'static str,
        index: usize,
        size: usize,
    },

    #[error("reward {0} outside [0, 1]")]
    RewardOutOfRange(f64),

    #[error("prior strength must be positive, got {0}")]
    NonPositivePrior(f64),

    #[error("empty population: {0}")]
    EmptyPopulation(&'static str),

    #[error("policy enumeration of {count} candidates exceeds cap {cap}")]
    EnumerationCap { count: u128, cap: u128 },

    #[error("sampled models were not retained by the run")]
    ModelsNotRetained,

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}
