use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("index out of range: {what} = {index} (limit {limit})")]
    IndexOutOfRange {
        what: &'static str,
        index: usize,
        limit: usize,
    },

    #[error("iterate diverged (non-finite value) at step {step}")]
    Divergence { step: usize },

    #[error("degenerate pivot: random-scaling denominator is zero")]
    DegeneratePivot,

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("only {surviving} bootstrap chains survived, need at least {required}")]
    InsufficientChains { surviving: usize, required: usize },

    #[error("{failed} of {reps} repetitions failed (more than 5%)")]
    TooManyFailures { failed: usize, reps: usize },

    #[error("config error: {0}")]
    Config(String),

    #[error("malformed {what}: {reason}")]
    Parse { what: &'static str, reason: String },

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
