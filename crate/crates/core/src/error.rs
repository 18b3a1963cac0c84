use thiserror::Error;

/// Errors raised by problem construction, sketching, oracles and solvers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("objective returned non-finite value {value} at probe point {point:?}")]
    Evaluation { point: Vec<f64>, value: f64 },

    #[error("no trace reached the success threshold {threshold}")]
    NoSuccess { threshold: String },

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn config<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Config(msg.into()))
}
