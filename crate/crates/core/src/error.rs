use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("transcript contains no parseable turns")]
    EmptyTranscript,

    #[error("malformed input: {0}")]
    MalformedInput(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("embedding dimensions differ ({left} vs {right})")]
    DimensionMismatch { left: usize, right: usize },

    #[error("cosine similarity is undefined for a zero vector")]
    ZeroVector,

    #[error("index {index} out of range for {len} items")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("input has {tokens} tokens, summarizer limit is {limit}")]
    InputTooLong { tokens: usize, limit: usize },

    #[error("backend unavailable at {endpoint} after {attempts} attempts: {reason}")]
    BackendUnavailable {
        endpoint: String,
        attempts: u32,
        reason: String,
    },

    #[error("recursion exceeded the maximum depth of {max_depth}")]
    DepthExceeded { max_depth: usize },

    #[error("reference summary has no tokens")]
    EmptyReference,

    #[error("corpus has no candidate/reference pairs")]
    EmptyCorpus,

    #[error("{}: {source}", path.display())]
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
