use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    #[error("atom clouds differ in size: {left} vs {right}")]
    SizeMismatch { left: usize, right: usize },

    #[error("path has {got} entries, grid has {expected} nodes")]
    LengthMismatch { expected: usize, got: usize },

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("state became non-finite at step {step}")]
    NonFinite { step: usize },

    #[error("root bracket failed at x = {at:.6e} (constraint violates its declared slope bounds)")]
    BracketFailure { at: f64 },

    #[error("sigma has no declared positive lower bound; control recovery needs |sigma| >= floor > 0")]
    DegenerateSigma,

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error(
        "optimizer did not converge after {iterations} iterations \
         (grad norm {grad_norm:.3e}, terminal violation {violation:.3e})"
    )]
    OptimizerFailed {
        iterations: usize,
        grad_norm: f64,
        violation: f64,
    },

    #[error("event too rare for naive Monte Carlo: pilot estimate {estimate:.3e} < required {required:.3e}")]
    EventTooRare { estimate: f64, required: f64 },

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("config parse error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
