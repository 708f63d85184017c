use std::path::PathBuf;

use thiserror::Error;

/// Harness failures, grouped by the exit code they map to.
#[derive(Debug, Error)]
pub enum HarnessError {
    /// Malformed or invalid configuration; exit code 2.
    #[error("{0}")]
    Config(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Core(#[from] optaccel_core::Error),

    /// Anything else that stopped a run; exit code 3.
    #[error("{0}")]
    Runtime(String),
}

impl HarnessError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        HarnessError::Io {
            path: path.into(),
            source,
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Config(_) => 2,
            HarnessError::Core(optaccel_core::Error::InvalidParameter { .. }) => 2,
            _ => 3,
        }
    }
}

pub type Result<T> = std::result::Result<T, HarnessError>;
