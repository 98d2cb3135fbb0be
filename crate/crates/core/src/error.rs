use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("bad trace magic {0:?}")]
    BadMagic([u8; 4]),

    #[error("unsupported trace version {0}")]
    VersionMismatch(u32),

    #[error("trace truncated: expected {expected} records, got {got}")]
    TruncatedRecord { expected: u64, got: u64 },

    #[error("malformed trace record {index}: {reason}")]
    MalformedRecord { index: u64, reason: String },

    #[error("malformed code image: {0}")]
    Image(String),

    #[error("line {0:#x} is not mapped by any segment")]
    UnmappedLine(u64),

    #[error("invalid config: {0}")]
    Config(String),

    #[error("invalid generator parameters: {0}")]
    Params(String),

    #[error("trace disagrees with image at pc {pc:#x}: {reason}")]
    TraceMismatch { pc: u64, reason: String },

    #[error("simulation error at pc {pc:#x}: {reason}")]
    Simulation { pc: u64, reason: String },

    #[error("metrics need at least one retired instruction")]
    NothingRetired,

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Whether the error is a broken simulator invariant rather than bad input.
    pub fn is_internal(&self) -> bool {
        matches!(self, Error::Simulation { .. })
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
