use thiserror::Error;

/// A problem with the configuration, naming the offending key.
#[derive(Debug, Error)]
#[error("{key}: {message}")]
pub struct ConfigError {
    pub key: String,
    pub message: String,
}

impl ConfigError {
    pub fn new(key: impl Into<String>, message: impl Into<String>) -> Self {
        Self {
            key: key.into(),
            message: message.into(),
        }
    }
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(#[from] ConfigError),
    #[error("cannot parse config: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("{0}")]
    Core(#[from] regvi_core::Error),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl CliError {
    /// Process exit code: 1 for input problems, 2 for numerical failures.
    pub fn exit_code(&self) -> i32 {
        use regvi_core::Error as E;
        match self {
            CliError::Core(
                E::NotPositiveDefinite { .. } | E::LinearSolver { .. } | E::QpIterationLimit(_),
            ) => 2,
            _ => 1,
        }
    }
}
