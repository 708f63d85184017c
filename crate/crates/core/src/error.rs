use thiserror::Error;

/// Errors produced by problem construction, optimization runs and analysis.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("non-finite {what} at iteration {iteration}")]
    NonFinite { iteration: u64, what: &'static str },

    #[error("operation requires a built-in least-squares problem")]
    NotLeastSquares,

    #[error("linear algebra failure: {0}")]
    Numerical(String),

    #[error("trace i/o: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}
