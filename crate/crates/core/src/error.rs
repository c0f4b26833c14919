use alloc::string::String;

use crate::dist::DistError;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error(transparent)]
    Dist(#[from] DistError),
    #[error("context of {len} tokens exceeds the maximum of {max}")]
    ContextTooLong { len: usize, max: usize },
    #[error("backend unavailable: {0}")]
    BackendUnavailable(String),
    #[error("backend protocol error: {0}")]
    Protocol(String),
    #[error("invalid model: {0}")]
    InvalidModel(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("invalid preferences: {0}")]
    InvalidPreferences(String),
    #[error(
        "enumeration too large: vocab {vocab_size}, window {window} (limit vocab {max_vocab}, window {max_window})"
    )]
    EnumerationTooLarge { vocab_size: usize, window: usize, max_vocab: usize, max_window: usize },
}
