use std::path::{Path, PathBuf};

use thiserror::Error;

/// Failure of a subcommand, classified by exit code.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("runtime error: {0}")]
    Runtime(String),
    #[error("I/O error on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed file {}: {msg}", path.display())]
    Malformed { path: PathBuf, msg: String },
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 1,
            CliError::Runtime(_) => 2,
            CliError::Io { .. } | CliError::Malformed { .. } => 3,
        }
    }

    pub fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    /// Classifies an error raised while reading `path`.
    pub fn reading(path: &Path, err: adagan::Error) -> Self {
        match err {
            adagan::Error::Io(source) => CliError::io(path, source),
            adagan::Error::Format { .. } | adagan::Error::Shape { .. } => CliError::Malformed {
                path: path.to_path_buf(),
                msg: err.to_string(),
            },
            other => CliError::from(other),
        }
    }
}

impl From<adagan::Error> for CliError {
    fn from(err: adagan::Error) -> Self {
        match err {
            adagan::Error::Config(msg) => CliError::Config(msg),
            adagan::Error::Io(source) => CliError::Io {
                path: PathBuf::new(),
                source,
            },
            other => CliError::Runtime(other.to_string()),
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;
