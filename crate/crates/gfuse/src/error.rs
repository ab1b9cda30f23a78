use std::io;
use std::path::{Path, PathBuf};

use gfuse_core::Error as CoreError;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{file}{}: {msg}", line.map(|l| format!(":{l}")).unwrap_or_default())]
    DatasetMalformed { file: PathBuf, line: Option<usize>, msg: String },
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("config: {0}")]
    Config(String),
    #[error("unknown method `{0}`")]
    UnknownMethod(String),
    #[error(transparent)]
    Core(#[from] CoreError),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn io(path: impl AsRef<Path>, source: io::Error) -> Self {
        Error::Io {
            path: path.as_ref().to_path_buf(),
            source,
        }
    }

    pub fn malformed(file: impl AsRef<Path>, line: Option<usize>, msg: impl Into<String>) -> Self {
        Error::DatasetMalformed {
            file: file.as_ref().to_path_buf(),
            line,
            msg: msg.into(),
        }
    }

    /// Process exit status for this error.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Io { .. } => 3,
            Error::Core(CoreError::NonFiniteLoss(_)) => 4,
            Error::Core(CoreError::ChannelMismatch { .. }) => 5,
            _ => 2,
        }
    }
}
