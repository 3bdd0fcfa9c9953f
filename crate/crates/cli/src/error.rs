use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: record {record:?}: invalid character {ch:?} at position {position}")]
    InvalidRecord { path: PathBuf, record: String, position: usize, ch: char },

    #[error("{path}: malformed record near line {line}: {reason}")]
    Malformed { path: PathBuf, line: usize, reason: String },

    #[error("forward file has {forward} records, reverse file has {reverse}")]
    RecordCountMismatch { forward: usize, reverse: usize },

    #[error(transparent)]
    Channel(#[from] dna_channel::Error),
}

impl CliError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io { path: path.into(), source }
    }

    /// 2 for configuration problems, 3 for input/output, 4 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Io { .. }
            | CliError::InvalidRecord { .. }
            | CliError::Malformed { .. }
            | CliError::RecordCountMismatch { .. } => 3,
            CliError::Channel(_) => 4,
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
