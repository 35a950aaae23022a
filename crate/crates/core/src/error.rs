use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// Malformed input file; `line` is 1-based.
    #[error("{path}:{line}: {message}")]
    Input {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("image error on {path}: {message}")]
    Image { path: PathBuf, message: String },

    #[error("frame sampling failed for {video}: {message}")]
    Sampling { video: String, message: String },

    #[error("alignment error: {0}")]
    Alignment(String),

    #[error("geometry error: {0}")]
    Geometry(String),

    #[error("annotation adapter failure: {0}")]
    Annotation(String),

    #[error("contract violation: {0}")]
    Precondition(String),

    #[error("fold construction failed: {0}")]
    FoldConstruction(String),

    #[error("training diverged at epoch {epoch}: {message}")]
    Training { epoch: usize, message: String },

    #[error("data error for sample {sample_id}: {message}")]
    Data { sample_id: String, message: String },

    #[error("integrity error: {0}")]
    Integrity(String),

    #[error("score undefined: {0}")]
    UndefinedScore(String),

    #[error("unknown architecture `{0}`")]
    UnknownArchitecture(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("no samples found in {0}")]
    NoSamples(PathBuf),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn input(path: impl Into<PathBuf>, line: usize, message: impl Into<String>) -> Self {
        Error::Input {
            path: path.into(),
            line,
            message: message.into(),
        }
    }
}
