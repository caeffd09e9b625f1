use std::path::PathBuf;

/// Errors from dataset ingest, sampling and augmentation.
#[derive(Debug, thiserror::Error)]
pub enum DataError {
    #[error("parse error at {context}: {message}")]
    Parse { context: String, message: String },

    #[error("data error: {0}")]
    Data(String),

    #[error("size error: {0}")]
    Size(String),

    #[error("sampling exhausted: {0}")]
    SamplingExhausted(String),

    #[error("empty corpus: {0}")]
    EmptyCorpus(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("I/O failure for {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Core(#[from] lltext_core::CoreError),
}

pub type Result<T> = std::result::Result<T, DataError>;

impl DataError {
    pub fn parse(context: impl Into<String>, message: impl Into<String>) -> Self {
        DataError::Parse {
            context: context.into(),
            message: message.into(),
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        DataError::Io {
            path: path.into(),
            source,
        }
    }
}
