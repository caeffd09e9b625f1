/// Errors from metric computation.
#[derive(Debug, thiserror::Error)]
pub enum MetricsError {
    #[error("shape error: {0}")]
    Shape(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("empty corpus: {0}")]
    EmptyCorpus(String),

    #[error(transparent)]
    Core(#[from] lltext_core::CoreError),
}

pub type Result<T> = std::result::Result<T, MetricsError>;

impl MetricsError {
    pub fn shape(msg: impl Into<String>) -> Self {
        MetricsError::Shape(msg.into())
    }

    pub fn config(msg: impl Into<String>) -> Self {
        MetricsError::Config(msg.into())
    }
}
