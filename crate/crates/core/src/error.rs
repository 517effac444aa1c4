use thiserror::Error;

/// Errors produced by the simulator and the experiment layer.
#[derive(Debug, Error)]
pub enum Error {
    /// Mismatched sizes, invalid operators, out-of-range indices.
    #[error("invalid argument: {0}")]
    Argument(String),

    /// Malformed Pauli-string text. `position` is the byte offset of the offending token.
    #[error("parse error at position {position}: {message}")]
    Parse { position: usize, message: String },

    /// A state that violates a precondition, e.g. not normalized.
    #[error("invalid state: {0}")]
    State(String),

    /// Non-finite values or a failed factorization.
    #[error("numeric failure: {0}")]
    Numeric(String),

    /// Experiment configuration rejected by validation. `path` is a dotted key path.
    #[error("config error at `{path}`: {message}")]
    Config { path: String, message: String },

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn arg(msg: impl Into<String>) -> Self {
        Error::Argument(msg.into())
    }

    pub(crate) fn numeric(msg: impl Into<String>) -> Self {
        Error::Numeric(msg.into())
    }

    pub(crate) fn config(path: impl Into<String>, msg: impl Into<String>) -> Self {
        Error::Config {
            path: path.into(),
            message: msg.into(),
        }
    }
}
