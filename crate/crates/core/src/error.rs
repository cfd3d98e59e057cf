use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("integer overflow: {0}")]
    Overflow(String),

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("capacity exceeded: {what} needs {needed}, cap is {cap}")]
    Capacity { what: String, needed: u128, cap: u128 },

    #[error("basis mismatch: {0}")]
    BasisMismatch(String),

    #[error("zero vector: {0}")]
    ZeroVector(String),

    #[error("infeasible partition: {0}")]
    Infeasible(String),

    #[error("rank {rank} stalled in phase `{phase}` (watchdog {timeout_ms} ms)")]
    Deadlock {
        rank: usize,
        phase: &'static str,
        timeout_ms: u128,
    },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("sampler failed: {0}")]
    Sampler(String),

    #[error("cancelled")]
    Cancelled,
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(line: usize, msg: impl Into<String>) -> Self {
        Error::Parse {
            line,
            msg: msg.into(),
        }
    }
}
