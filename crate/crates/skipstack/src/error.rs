use std::io;
use std::path::PathBuf;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error(transparent)]
    Core(#[from] skipstack_core::Error),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("malformed {what}: {reason}")]
    Format { what: String, reason: String },

    #[error("I/O error on {}: {source}", path.display())]
    Io { path: PathBuf, source: io::Error },
}

impl CliError {
    pub fn io(path: impl Into<PathBuf>, source: io::Error) -> Self {
        CliError::Io { path: path.into(), source }
    }

    pub fn format(what: impl Into<String>, reason: impl ToString) -> Self {
        CliError::Format { what: what.into(), reason: reason.to_string() }
    }

    /// 2 for configuration / validation errors, 3 for numerical failures, 4 for I/O.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Format { .. } => 2,
            CliError::Core(e) if e.is_numerical() => 3,
            CliError::Core(_) => 2,
            CliError::Numerical(_) => 3,
            CliError::Io { .. } => 4,
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
