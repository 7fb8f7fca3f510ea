use std::path::PathBuf;

/// Failures of a run, each tied to a process exit code.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("numeric error: {0}")]
    Numeric(subscatter_core::Error),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("validation failed: criteria {0:?}")]
    ValidationFailed(Vec<u32>),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Numeric(_) => 3,
            CliError::Io { .. } | CliError::ValidationFailed(_) => 1,
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io { path: path.into(), source }
    }
}

impl From<subscatter_core::Error> for CliError {
    /// Rejected inputs are configuration errors; guard trips and quantities
    /// that do not exist for the scenario are numeric ones.
    fn from(e: subscatter_core::Error) -> Self {
        use subscatter_core::Error as E;
        match e {
            E::Config(_) | E::Domain(_) | E::InvalidGrid(_) | E::LengthMismatch { .. } => CliError::Config(e.to_string()),
            _ => CliError::Numeric(e),
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
