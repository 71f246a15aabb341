use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("tape does not match this network: {0}")]
    StaleTape(String),

    #[error("non-finite value in {0}")]
    Numeric(String),

    #[error("replay buffer holds {have} transitions, {need} requested")]
    InsufficientData { have: usize, need: usize },

    #[error("empty dataset")]
    EmptyDataset,

    #[error("checkpoint {path}: {reason}")]
    Checkpoint { path: PathBuf, reason: String },

    #[error("malformed file {path}: {reason}")]
    Format { path: PathBuf, reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
