use thiserror::Error;

/// Errors raised across the library.
#[derive(Debug, Error)]
pub enum NeuError {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("map is not invertible: {0}")]
    Invertibility(String),
    #[error("fixed-point iteration did not converge after {iterations} steps (residual {residual:e})")]
    Convergence { iterations: usize, residual: f64 },
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("evaluation error: {0}")]
    Evaluation(String),
    #[error("rank-deficient design: {0}")]
    RankDeficient(String),
    #[error("numerical error: {0}")]
    Numerical(String),
    #[error("construction failed: {0}")]
    Construction(String),
    #[error("invalid data: {0}")]
    Data(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = NeuError> = std::result::Result<T, E>;

pub(crate) fn check_dim(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(NeuError::DimensionMismatch { expected, got })
    }
}
