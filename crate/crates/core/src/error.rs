use thiserror::Error;

/// Errors raised by the numerical kernels and the classification pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    /// The principal logarithm is ambiguous (a rotation angle reached π).
    #[error("branch ambiguity: {0}")]
    Branch(String),

    /// Sampling too coarse to resolve the requested quantity.
    #[error("insufficient resolution: {0}")]
    Resolution(String),

    #[error("no convergence: {0}")]
    NonConvergence(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// True for failures that a finer grid, more sweeps or a reseed may fix.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::NonConvergence(_) | Error::Resolution(_) | Error::Branch(_)
        )
    }
}
