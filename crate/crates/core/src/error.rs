use thiserror::Error;

/// Errors surfaced by the library and CLI.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("index out of range: {0}")]
    IndexOutOfRange(String),

    #[error("singular geometry: {0}")]
    SingularGeometry(String),

    #[error("degenerate pulse: {0}")]
    DegeneratePulse(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("oracle invalid: {0}")]
    OracleInvalid(String),

    #[error("not identifiable: {0}")]
    NotIdentifiable(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error in {path}: {message}")]
    Parse { path: String, message: String },
}

pub type Result<T> = std::result::Result<T, Error>;
