//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("parse error: {0}")]
    Parse(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("spawn sampling failed: {0}")]
    Spawn(String),

    #[error("usage error: {0}")]
    Usage(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("incompatible checkpoint: {0}")]
    Incompatible(String),

    #[error("undefined score: {0}")]
    UndefinedScore(String),
}

pub type Result<T> = std::result::Result<T, Error>;
