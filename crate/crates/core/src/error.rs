use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// Two distinct nodes share a position, so the path loss between them is unbounded.
    #[error("degenerate geometry: nodes {first} and {second} coincide")]
    DegenerateGeometry { first: usize, second: usize },

    #[error("instance has {n} nodes, above the exact-search limit of {limit}")]
    InstanceTooLarge { n: usize, limit: usize },

    #[error("numerical failure: {0}")]
    InfeasibleNumerics(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("{count} of {total} realizations failed, above the 1% exclusion budget")]
    ExclusionBudget { count: usize, total: usize },

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn numerics(msg: impl Into<String>) -> Self {
        Error::InfeasibleNumerics(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
