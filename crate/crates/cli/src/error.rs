use thiserror::Error;

/// Failure classes of the command-line tool, each with its own exit code.
#[derive(Debug, Error)]
pub enum CliError {
    /// Bad configuration or arguments (exit 1).
    #[error("{0}")]
    Validation(String),
    /// Integration or acceptance failure (exit 2).
    #[error("{0}")]
    Numerical(String),
    /// Filesystem problems (exit 3).
    #[error("{0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Validation(_) => 1,
            CliError::Numerical(_) => 2,
            CliError::Io(_) => 3,
        }
    }

    pub fn io(context: impl std::fmt::Display, err: std::io::Error) -> Self {
        CliError::Io(format!("{context}: {err}"))
    }
}

impl From<geospread_core::Error> for CliError {
    fn from(e: geospread_core::Error) -> Self {
        if e.is_numerical() || matches!(e, geospread_core::Error::Invariant(_)) {
            CliError::Numerical(e.to_string())
        } else {
            CliError::Validation(e.to_string())
        }
    }
}
