use thiserror::Error;

/// Errors shared by every module in this crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("matrix is not hermitian (max deviation {0:.3e})")]
    NotHermitian(f64),

    #[error("matrix is not unitary (max deviation {0:.3e})")]
    NotUnitary(f64),

    #[error("state norm drifted by {0:.3e} in a single step; reduce dt")]
    StepTooLarge(f64),

    #[error("integration failure near coordinate pole at t = {0}")]
    PoleFailure(f64),

    #[error("quadrature did not reach the requested tolerance (best {0:.3e})")]
    QuadratureNoConverge(f64),

    #[error("series did not converge within {0} terms")]
    SeriesNoConverge(usize),

    #[error("invalid input: {0}")]
    InvalidInput(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }
}
