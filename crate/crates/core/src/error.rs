use thiserror::Error;

use crate::choice::ChoiceError;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Choice(#[from] ChoiceError),

    #[error("invalid scenario: {0}")]
    InvalidScenario(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("{source_name}, row {row}: {message}")]
    Load {
        source_name: String,
        row: usize,
        message: String,
    },

    #[error("configuration error in `{field}`: {message}")]
    Config { field: String, message: String },

    #[error("coefficients are not identified by the data: {}", .coefficients.join(", "))]
    Unidentifiable { coefficients: Vec<String> },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn config(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            message: message.into(),
        }
    }
}
