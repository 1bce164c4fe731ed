use std::path::PathBuf;

use thiserror::Error;

use crate::estimator::SolverTrace;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("axis must be a unit vector (norm {norm})")]
    NonUnitAxis { norm: f64 },

    #[error("invalid robot description at `{path}`: {message}")]
    Description { path: String, message: String },

    #[error("parameter layout mismatch: {0}")]
    Layout(String),

    #[error("dataset row {row}: {message}")]
    DatasetRow { row: usize, message: String },

    #[error("dataset header: {0}")]
    DatasetHeader(String),

    #[error("dataset is empty")]
    EmptyDataset,

    #[error("unusable dataset: {0}")]
    UnusableDataset(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("solver diverged at iteration {iteration}: loss {loss}")]
    Diverged {
        iteration: usize,
        loss: f64,
        trace: Box<SolverTrace>,
    },

    #[error("normal equations are not positive definite at iteration {iteration}")]
    Singular {
        iteration: usize,
        trace: Box<SolverTrace>,
    },

    #[error("fold {fold}: {source}")]
    Fold {
        fold: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("config `{path}`: {message}")]
    Config { path: String, message: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for failures rooted in the numerics (divergence, singular systems).
    pub fn is_numerical(&self) -> bool {
        match self {
            Error::Diverged { .. } | Error::Singular { .. } => true,
            Error::Fold { source, .. } => source.is_numerical(),
            _ => false,
        }
    }

    /// Solver trace up to the failure, for numerical aborts.
    pub fn trace(&self) -> Option<&SolverTrace> {
        match self {
            Error::Diverged { trace, .. } | Error::Singular { trace, .. } => Some(trace),
            Error::Fold { source, .. } => source.trace(),
            _ => None,
        }
    }

    pub fn is_unusable_dataset(&self) -> bool {
        match self {
            Error::UnusableDataset(_) => true,
            Error::Fold { source, .. } => source.is_unusable_dataset(),
            _ => false,
        }
    }
}
