use std::path::{Path, PathBuf};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] semcode::Error),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("run directory {0} is locked by another command (remove the lock file if stale)")]
    Locked(PathBuf),

    #[error("{0}")]
    MissingInput(String),
}

impl CliError {
    pub fn io(path: impl AsRef<Path>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.as_ref().to_path_buf(),
            source,
        }
    }

    /// Stable machine-readable class; core errors keep their own class names.
    pub fn class(&self) -> &'static str {
        match self {
            CliError::Core(e) => e.class(),
            CliError::Io { .. } => "Io",
            CliError::Locked(_) => "Locked",
            CliError::MissingInput(_) => "MissingInput",
        }
    }

    /// `error kind=<class>: <message>` on a single line.
    pub fn one_line(&self) -> String {
        let msg = self.to_string().replace(['\n', '\r'], " ");
        format!("error kind={}: {msg}", self.class())
    }
}

pub type CliResult<T> = Result<T, CliError>;
