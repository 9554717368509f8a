use thiserror::Error;

pub type Result<T> = std::result::Result<T, MfgError>;

#[derive(Debug, Error)]
pub enum MfgError {
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: String, actual: String },

    #[error("index out of range: {what} {index} (size {size})")]
    OutOfRange {
        what: &'static str,
        index: usize,
        size: usize,
    },

    #[error("not a probability distribution: {0}")]
    NotStochastic(String),

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("epsilon-net needs {required} points but the budget is {budget}")]
    NetBudgetExceeded { required: f64, budget: usize },

    #[error("epsilon-net is empty")]
    EmptyNet,

    #[error("value iteration did not converge within {0} iterations")]
    NoConvergence(usize),

    #[error("diverged at episode {k}, step {t}: {reason}")]
    Diverged {
        k: usize,
        t: usize,
        reason: String,
        /// Serialized checkpoint taken at the point of failure.
        snapshot: Box<String>,
    },

    #[error("invariant violated at episode {k}, step {t}: {reason}")]
    InvariantViolated { k: usize, t: usize, reason: String },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
