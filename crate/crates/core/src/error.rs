use std::path::PathBuf;

/// Errors produced by the decoding engine, the oracle and the asset loaders.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("index error: {0}")]
    Index(String),

    #[error("parameter error: {0}")]
    Parameter(String),

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("degenerate residual: target and draft distributions coincide")]
    DegenerateResidual,

    #[error("configuration error: {0}")]
    Config(String),

    #[error("enumeration limit: {0}")]
    EnumerationLimit(String),

    #[error("parse error in {path}: {message}")]
    Parse { path: String, message: String },

    #[error("i/o error at {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(path: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Parse {
            path: path.into(),
            message: message.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
