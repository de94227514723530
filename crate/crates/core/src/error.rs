use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("invalid scenario: {}", .0.join("; "))]
    InvalidScenario(Vec<String>),

    #[error("degenerate reward distribution")]
    DegenerateReward,

    #[error("gradient direction undefined: zero vector")]
    ZeroDirection,

    #[error("non-convergent direction: |contraction| = {0} >= 1")]
    NonConvergent(f64),

    #[error("empty ensemble")]
    EmptyEnsemble,

    #[error("ensemble records disagree: {0}")]
    InconsistentRecords(String),

    #[error("missing tolerance for comparison {0:?}")]
    MissingTolerance(String),

    #[error("{path}: {source}")]
    Io {
        path: std::path::PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("failed to parse {path}: {message}")]
    Parse {
        path: std::path::PathBuf,
        message: String,
    },
}

impl Error {
    pub fn io(path: impl Into<std::path::PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn parse(path: impl Into<std::path::PathBuf>, message: impl Into<String>) -> Self {
        Error::Parse {
            path: path.into(),
            message: message.into(),
        }
    }
}

/// Checks that a vector has the expected length before any math touches it.
pub fn check_dim(expected: usize, actual: usize) -> Result<()> {
    if expected == actual {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, actual })
    }
}
