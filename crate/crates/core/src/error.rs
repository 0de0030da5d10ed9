use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Bad configuration value; names the offending field.
    #[error("configuration error: {field}: {message}")]
    Config { field: String, message: String },

    /// Malformed input file.
    #[error("parse error at record {record}: {message}")]
    Parse { record: usize, message: String },

    /// A value violated a documented range or validity rule.
    #[error("validation error: {0}")]
    Validation(String),

    /// Bad operation parameter (filter length, decimation factor, ...).
    #[error("parameter error: {0}")]
    Parameter(String),

    /// Tensor/vector shape mismatch.
    #[error("shape error: expected {expected}, got {actual}")]
    Shape { expected: String, actual: String },

    /// Split/fold construction failure.
    #[error("split error: {0}")]
    Split(String),

    /// Non-finite value encountered during numeric work.
    #[error("numeric error: {0}")]
    Numeric(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn config(field: &str, message: impl Into<String>) -> Self {
        Error::Config {
            field: field.to_string(),
            message: message.into(),
        }
    }

    /// Process exit code for the CLI: 2 usage/config, 3 data validation, 4 numeric.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config { .. } | Error::Parameter(_) => 2,
            Error::Parse { .. } | Error::Validation(_) | Error::Split(_) => 3,
            Error::Numeric(_) | Error::Shape { .. } => 4,
            Error::Io(_) => 3,
        }
    }
}
