use thiserror::Error;

#[derive(Debug, Error)]
pub enum BicoError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("numerical failure: {0}")]
    Numeric(String),

    #[error("configuration error in `{field}`: {message}")]
    Config { field: String, message: String },

    #[error("simulator failure: {0}")]
    Simulator(String),

    #[error("{0}")]
    Runtime(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl BicoError {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        BicoError::InvalidArgument(msg.into())
    }

    pub(crate) fn config(field: impl Into<String>, message: impl Into<String>) -> Self {
        BicoError::Config {
            field: field.into(),
            message: message.into(),
        }
    }
}

pub type Result<T, E = BicoError> = std::result::Result<T, E>;
