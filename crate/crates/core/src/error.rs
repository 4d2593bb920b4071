use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("{what} out of range: {value} (valid: {valid})")]
    OutOfRange {
        what: &'static str,
        value: String,
        valid: String,
    },

    #[error("value iteration did not converge after {iterations} iterations (last residual {residual:e})")]
    NotConverged { iterations: usize, residual: f64 },

    #[error("unsupported schema version {found} (expected {expected})")]
    VersionMismatch { found: u32, expected: u32 },

    #[error("fingerprint mismatch: file says {stored}, payload hashes to {computed}")]
    HashMismatch { stored: String, computed: String },

    #[error("malformed artifact: {0}")]
    Malformed(String),

    #[error("unsupported figure id `{0}`")]
    UnsupportedFigure(String),

    #[error("session error: {0}")]
    Session(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
