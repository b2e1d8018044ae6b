use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// A hyperparameter or argument is outside its valid range.
    #[error("invalid parameter: {0}")]
    Param(String),

    /// A caller broke an operation's precondition (e.g. an unlabeled token).
    #[error("contract violation: {0}")]
    Contract(String),

    #[error("line {line}: invalid UTF-8")]
    Decode { line: usize },

    #[error("unsupported model header {found:?} (expected {expected:?})")]
    Version { expected: String, found: String },

    #[error("line {line}: {msg}")]
    Malformed { line: usize, msg: String },

    #[error("scripted label source exhausted after {0} labelings")]
    ScriptExhausted(usize),

    #[error("{path}: {source}")]
    File {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn param(msg: impl Into<String>) -> Self {
        Error::Param(msg.into())
    }

    pub(crate) fn file(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::File {
            path: path.into(),
            source,
        }
    }
}
