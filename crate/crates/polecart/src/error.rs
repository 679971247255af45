use std::path::PathBuf;

use thiserror::Error;

/// Errors surfaced by the engine and harness.
#[derive(Debug, Error)]
pub enum Error {
    #[error("episode is over; reset the environment before stepping")]
    EpisodeOver,

    #[error("q-value slice is empty")]
    EmptyQValues,

    #[error("cannot sample from an empty replay buffer")]
    EmptyBuffer,

    #[error("priority updates require the prioritized replay strategy")]
    NotPrioritized,

    #[error("length mismatch: {0}")]
    LengthMismatch(&'static str),

    #[error("invalid layer widths: {0}")]
    InvalidWidths(String),

    #[error("non-finite gradient; parameters left untouched")]
    NonFiniteGradient,

    #[error("non-finite loss at global step {global_step}")]
    NonFiniteLoss { global_step: u64 },

    #[error("checkpoint {path}: {reason}")]
    Checkpoint { path: PathBuf, reason: String },

    #[error("config: {0}")]
    Config(String),

    #[error("{path}: {source}")]
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

pub type Result<T> = std::result::Result<T, Error>;
