use std::path::PathBuf;

/// Pipeline-level errors, mapped onto process exit codes:
/// configuration 2, data/I-O 3, numeric failure 4.
#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    #[error("config error: {0}")]
    Config(String),

    #[error("data error: {0}")]
    Data(String),

    #[error("numeric failure: {0}")]
    Numeric(String),

    #[error("I/O failure for {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, PipelineError>;

impl PipelineError {
    pub fn config(msg: impl Into<String>) -> Self {
        PipelineError::Config(msg.into())
    }

    pub fn data(msg: impl Into<String>) -> Self {
        PipelineError::Data(msg.into())
    }

    pub fn numeric(msg: impl Into<String>) -> Self {
        PipelineError::Numeric(msg.into())
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        PipelineError::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code for the CLI contract.
    pub fn exit_code(&self) -> i32 {
        match self {
            PipelineError::Config(_) => 2,
            PipelineError::Data(_) | PipelineError::Io { .. } => 3,
            PipelineError::Numeric(_) => 4,
        }
    }
}

impl From<lltext_nn::NnError> for PipelineError {
    fn from(e: lltext_nn::NnError) -> Self {
        match e {
            lltext_nn::NnError::Config(m) => PipelineError::Config(m),
            lltext_nn::NnError::Numeric(m) => PipelineError::Numeric(m),
            lltext_nn::NnError::Shape(m) => PipelineError::Data(m),
            lltext_nn::NnError::Core(c) => PipelineError::Data(c.to_string()),
        }
    }
}

impl From<lltext_data::DataError> for PipelineError {
    fn from(e: lltext_data::DataError) -> Self {
        match e {
            lltext_data::DataError::Config(m) => PipelineError::Config(m),
            other => PipelineError::Data(other.to_string()),
        }
    }
}

impl From<lltext_core::CoreError> for PipelineError {
    fn from(e: lltext_core::CoreError) -> Self {
        PipelineError::Data(e.to_string())
    }
}

impl From<lltext_metrics::MetricsError> for PipelineError {
    fn from(e: lltext_metrics::MetricsError) -> Self {
        match e {
            lltext_metrics::MetricsError::Config(m) => PipelineError::Config(m),
            other => PipelineError::Data(other.to_string()),
        }
    }
}
