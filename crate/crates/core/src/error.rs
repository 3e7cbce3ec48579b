use thiserror::Error;

/// Errors raised by the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid dimensions {n_a}x{n_b}: {reason}")]
    InvalidDims {
        n_a: usize,
        n_b: usize,
        reason: &'static str,
    },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("matrix is not Hermitian (deviation {0:e})")]
    NotHermitian(f64),

    #[error("invalid rank target ({m},{n}) for total dimension {dim}")]
    InvalidRankTarget { m: usize, n: usize, dim: usize },

    #[error("state is not PPT: min eig(rho) = {min_rho:e}, min eig(rho^P) = {min_pt:e}")]
    NotPpt { min_rho: f64, min_pt: f64 },

    #[error("rank of {which} is ambiguous: eigenvalue {value:e} is within a factor 10 of the threshold {threshold:e}")]
    RankAmbiguity {
        which: &'static str,
        value: f64,
        threshold: f64,
    },

    #[error("construction rejected: {0}")]
    Construction(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
