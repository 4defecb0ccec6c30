use thiserror::Error;

/// Errors raised by the steady-state toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("operator is not Hermitian (asymmetry {asymmetry:.3e} exceeds {tolerance:.1e})")]
    NotHermitian { asymmetry: f64, tolerance: f64 },

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("invalid density matrix: {0}")]
    InvalidState(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("linear solve failed after {iterations} iterations (relative residual {residual:.3e})")]
    Solver { residual: f64, iterations: usize },

    #[error(
        "eigenvector matrix condition number {condition:.3e} exceeds {threshold:.1e}; \
         use the biorthogonal-kernel or resolvent method instead"
    )]
    IllConditioned { condition: f64, threshold: f64 },

    #[error("left and right kernels are misaligned (overlap matrix condition number {condition:.3e})")]
    KernelMisaligned { condition: f64 },

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("integration failed at t = {time}: {reason}")]
    Integration { time: f64, reason: String },

    #[error("invalid quantum numbers: {0}")]
    QuantumNumbers(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("format error: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
