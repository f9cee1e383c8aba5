use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {op}: {left:?} vs {right:?}")]
    Dimension {
        op: &'static str,
        left: Vec<usize>,
        right: Vec<usize>,
    },
    #[error("non-finite value in {0}")]
    Numeric(&'static str),
    #[error("class index {index} out of range for {classes} classes")]
    ClassIndex { index: usize, classes: usize },
    #[error("step {step} outside schedule horizon {horizon}")]
    Range { step: usize, horizon: usize },
    #[error("cannot place {classes} class means in {dim} dimensions with pairwise angle >= 60 degrees; lower K or raise d")]
    Generation { classes: usize, dim: usize },
    #[error("class {class} has {available} training samples, {requested} requested")]
    Split {
        class: usize,
        available: usize,
        requested: usize,
    },
    #[error("configuration error: {0}")]
    Config(String),
    #[error("pseudo-labels missing for {} indices (first: {:?})", .missing.len(), .missing.iter().take(8).collect::<Vec<_>>())]
    Coverage { missing: Vec<usize> },
    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },
    #[error("validation error at index {index}: {message}")]
    Validation { index: usize, message: String },
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Csv(#[from] csv::Error),
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

    pub(crate) fn parse(path: impl Into<PathBuf>, line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            path: path.into(),
            line,
            message: message.into(),
        }
    }
}
