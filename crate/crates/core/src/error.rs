use thiserror::Error;

/// Errors raised by the optimizer and its building blocks.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("unknown objective `{0}` (expected ackley, branin_aug or hartmann6_aug)")]
    UnknownObjective(String),

    #[error("objective `{name}` needs at least {required} dimensions, got {got}")]
    DimensionTooSmall {
        name: String,
        required: usize,
        got: usize,
    },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("coordinate {index} = {value} lies outside [{lower}, {upper}]")]
    OutOfBounds {
        index: usize,
        value: f64,
        lower: f64,
        upper: f64,
    },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("matrix is not positive definite even with jitter {jitter:e}")]
    NotPositiveDefinite { jitter: f64 },

    #[error("budget {budget} cannot give each of {stages} stages at least {min_per_stage} evaluations")]
    BudgetTooSmall {
        budget: usize,
        stages: usize,
        min_per_stage: usize,
    },

    #[error("failed to parse embedding text at line {line}: {reason}")]
    Parse { line: usize, reason: String },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
