use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("cache integrity violated: {0}")]
    Integrity(String),
    #[error("size guard: {0}")]
    SizeGuard(String),
    #[error("config error in `{key}`: {message}")]
    Config { key: String, message: String },
    #[error("format error at byte offset {offset}: {message}")]
    Format { offset: usize, message: String },
    #[error("incompatible checkpoint version: expected {expected}, found {found}")]
    Version { expected: String, found: String },
    #[error("checkpoint parse error: {0}")]
    Parse(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn config(key: &str, message: impl Into<String>) -> Self {
        Error::Config {
            key: key.to_string(),
            message: message.into(),
        }
    }
}
