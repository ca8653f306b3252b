//! Error types shared across the crate.

use thiserror::Error;

/// Errors raised by the LLM backend layer.
#[derive(Debug, Error)]
pub enum BackendError {
    /// All retries exhausted (network failure, HTTP error, timeout).
    #[error("evaluation unavailable after {attempts} attempt(s): {reason}")]
    Unavailable { attempts: u32, reason: String },

    /// Reply received but not understood; the raw reply is preserved.
    #[error("malformed backend reply: {msg}; raw reply: {raw:?}")]
    Malformed { msg: String, raw: String },

    /// Replay backend has no entry for this request.
    #[error("replay cache miss for request hash {hash}")]
    CacheMiss { hash: String },

    /// API backend configured but the credential variable is unset.
    #[error("missing credentials: environment variable {var} is not set")]
    MissingCredentials { var: String },
}

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    /// Invalid configuration (dimension mismatches, bad keys, missing files).
    #[error("configuration error: {0}")]
    Config(String),

    /// Rejected input data (empty text, schema violations, duplicate ids).
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// Non-finite values or divergence during optimization.
    #[error("numerical error: {0}")]
    Numerical(String),

    /// LLM backend failure.
    #[error(transparent)]
    Backend(#[from] BackendError),

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),

    #[error("serialization error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Process exit code for the CLI: 2 config, 3 backend, 4 numerical.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::InvalidInput(_) | Error::Io(_) | Error::Json(_) => 2,
            Error::Backend(_) => 3,
            Error::Numerical(_) => 4,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
