use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("lattice size {0} is not a power of two >= 2")]
    NotPowerOfTwo(usize),
    #[error("invalid size: {0}")]
    InvalidSize(String),
    #[error("size mismatch: {0}")]
    SizeMismatch(String),
    #[error("tensor dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("index {index} out of range for {len} sites")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("eigensolver did not converge after {iterations} iterations (residual {residual:e})")]
    NotConverged { iterations: usize, residual: f64 },
    #[error("operator is not symmetric (asymmetry {0:e})")]
    NotSymmetric(f64),
    #[error("invalid parameters: {0}")]
    InvalidParameter(String),
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
