use std::fmt::Display;
use std::path::{Path, PathBuf};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    /// Bad or inconsistent configuration. `key` names the offending entry.
    #[error("{key}: {message}")]
    Config { key: String, message: String },
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    /// The run itself failed, e.g. the state diverged.
    #[error("{0}")]
    Numerical(String),
}

impl CliError {
    pub fn config(key: &str, message: impl Display) -> Self {
        Self::Config {
            key: key.to_string(),
            message: message.to_string(),
        }
    }

    pub fn io(path: &Path, source: std::io::Error) -> Self {
        Self::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    /// Process exit status: 1 for input problems, 2 for numerical failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Config { .. } | Self::Io { .. } => 1,
            Self::Numerical(_) => 2,
        }
    }
}
