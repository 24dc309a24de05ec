use std::io;

use thiserror::Error;

pub type Result<T, E = RamboError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum RamboError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid query: {0}")]
    InvalidQuery(String),

    #[error("incompatible filters: {0}")]
    IncompatibleFilter(String),

    #[error("cannot fold: {0}")]
    CannotFold(String),

    #[error("incompatible shard: {0}")]
    IncompatibleShard(String),

    #[error("corrupt index: {0}")]
    CorruptIndex(String),

    #[error("inconsistent index: {0}")]
    InconsistentIndex(String),

    #[error("empty corpus: {0}")]
    EmptyCorpus(String),

    #[error(transparent)]
    Io(#[from] io::Error),
}

impl RamboError {
    pub(crate) fn param(msg: impl Into<String>) -> Self {
        RamboError::InvalidParameter(msg.into())
    }
}
