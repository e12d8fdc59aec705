use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, Error)]
pub enum Error {
    /// A sequence was too short (or of the wrong length) for the operation.
    #[error("size error: {0}")]
    Size(String),

    /// The cone description is inconsistent with itself or with the data length.
    #[error("invalid cone specification: {0}")]
    Spec(String),

    /// An input violated a mathematical precondition.
    #[error("domain error: {0}")]
    Domain(String),

    /// An iterative solver did not certify its answer. Carries the best iterate.
    #[error("solver error: {message} (kkt residual {residual:.3e} after {iterations} iterations)")]
    Solver {
        message: String,
        best: Vec<f64>,
        residual: f64,
        iterations: usize,
    },

    /// A root search found no crossing in the requested range.
    #[error("range error: {0}")]
    Range(String),

    /// A regression could not be fit (too few points, no spread).
    #[error("fit error: {0}")]
    Fit(String),

    /// A construction would exceed its memory or work budget.
    #[error("resource error: {0}")]
    Resource(String),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn size(msg: impl Into<String>) -> Self {
        Error::Size(msg.into())
    }

    pub(crate) fn spec(msg: impl Into<String>) -> Self {
        Error::Spec(msg.into())
    }
}
