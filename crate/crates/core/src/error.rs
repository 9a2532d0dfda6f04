use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("surface form {surface:?} maps to both {first} and {second}")]
    LexiconConflict {
        surface: String,
        first: String,
        second: String,
    },

    #[error("duplicate id {0:?}")]
    DuplicateId(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("instance {0:?} has no prediction")]
    MissingPrediction(String),

    #[error("instance {0:?} has no gold label")]
    MissingLabel(String),

    #[error("unknown class label {0:?}")]
    UnknownClass(String),

    #[error("empty dataset")]
    EmptyDataset,

    #[error("id sets differ; offending ids: {}", .0.join(", "))]
    IdMismatch(Vec<String>),

    #[error("singular normal matrix")]
    Singular,

    #[error("{0}")]
    Invalid(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

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
