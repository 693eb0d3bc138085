//! Error type shared across the library.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, TdksError>;

#[derive(Debug, Error)]
pub enum TdksError {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("time grid mismatch: {0}")]
    TimeGridMismatch(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("propagation blow-up at t = {t}: {detail}")]
    BlowUp { t: f64, detail: String },

    #[error("ground-state iteration did not converge after {steps} steps (residual {residual:.3e})")]
    GroundStateNonConvergence { steps: usize, residual: f64 },

    #[error("line search failed: {0}")]
    LineSearchFailed(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("file format error: {0}")]
    Format(String),
}
