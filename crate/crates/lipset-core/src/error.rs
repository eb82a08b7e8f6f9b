use thiserror::Error;

#[derive(Debug, Error)]
pub enum LipsetError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("Lipschitz constant must be positive and finite, got {0}")]
    NonPositiveLipschitz(f64),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("unbounded slice: the envelope holds no samples")]
    UnboundedSlice,
    #[error("inconsistent data: {0}")]
    InconsistentData(String),
    #[error("solver failure: {0}")]
    Solver(String),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, LipsetError>;

pub(crate) fn check_dim(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(LipsetError::DimensionMismatch { expected, got })
    }
}
