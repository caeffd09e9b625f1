/// Errors from network construction, loss evaluation and I/O of side data.
#[derive(Debug, thiserror::Error)]
pub enum NnError {
    #[error("shape error: {0}")]
    Shape(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("numeric error: {0}")]
    Numeric(String),

    #[error(transparent)]
    Core(#[from] lltext_core::CoreError),
}

pub type Result<T> = std::result::Result<T, NnError>;

impl NnError {
    pub fn shape(msg: impl Into<String>) -> Self {
        NnError::Shape(msg.into())
    }

    pub fn config(msg: impl Into<String>) -> Self {
        NnError::Config(msg.into())
    }

    pub fn numeric(msg: impl Into<String>) -> Self {
        NnError::Numeric(msg.into())
    }
}
