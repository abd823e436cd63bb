use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: invalid UTF-8: {source}")]
    Utf8 {
        path: PathBuf,
        #[source]
        source: std::string::FromUtf8Error,
    },

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("{path}: {message}")]
    Format { path: PathBuf, message: String },

    #[error("duplicate {kind} id `{id}`")]
    DuplicateId { kind: &'static str, id: String },

    #[error("corpus is empty")]
    EmptyCorpus,

    #[error("vocabulary is empty")]
    EmptyVocabulary,

    #[error("channel `{0}` has not been indexed")]
    MissingChannel(crate::tokenize::TokenChannel),

    #[error("invalid parameter: {0}")]
    InvalidParam(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("index file {path}: {message}")]
    IndexFormat { path: PathBuf, message: String },

    #[error(transparent)]
    Diff(#[from] crate::evolve::diff::DiffError),

    #[error("mutator failed: {0}")]
    Mutator(String),

    #[error("evaluator failed: {0}")]
    Evaluator(String),

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
}
