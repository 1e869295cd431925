use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found} ({context})")]
    DimensionMismatch {
        expected: usize,
        found: usize,
        context: &'static str,
    },

    #[error("{what} is not Hermitian: ||A - A^H|| = {defect:e} exceeds {allowed:e}")]
    NotHermitian {
        what: String,
        defect: f64,
        allowed: f64,
    },

    #[error("subspace is not contained in the enclosing subspace: residual {residual:e} exceeds {allowed:e}")]
    NotContained { residual: f64, allowed: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("time grid is not uniform: step {index} differs from the first step by {deviation:e}")]
    NonUniformGrid { index: usize, deviation: f64 },

    #[error(
        "orbit routes disagree: H1c distance {h1c_distance:e}, H2c distance {h2c_distance:e} (allowed {allowed:e})"
    )]
    FastPathMismatch {
        h1c_distance: f64,
        h2c_distance: f64,
        allowed: f64,
    },

    #[error("coupled hidden subspace leaks into observable coordinates: residual {residual:e}")]
    CoordinateLeak { residual: f64 },

    #[error("malformed system file: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
