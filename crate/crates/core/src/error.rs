use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("out of bounds: {0}")]
    OutOfBounds(String),

    #[error("degenerate descriptor: {0}")]
    DegenerateDescriptor(String),

    #[error("incompatible descriptors: {0}")]
    IncompatibleDescriptor(String),

    #[error("insufficient train set: need at least 2 descriptors, got {0}")]
    InsufficientTrainSet(usize),

    #[error("point projects to infinity (w = {0:e})")]
    Projection(f64),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("{path}: byte {offset}: {reason}")]
    Decode { path: PathBuf, offset: u64, reason: String },

    #[error("dataset not found: {0}")]
    DatasetNotFound(String),

    #[error("config: {0}")]
    Config(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
