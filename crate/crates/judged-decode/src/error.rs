use std::path::PathBuf;

use judged_decode_core::Error as CoreError;

/// Failure classes of the command line tool, each with its own exit code.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("cannot access {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("backend error: {0}")]
    Backend(CoreError),
    #[error("verification failed: {0}")]
    Verification(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Verification(_) => 1,
            CliError::Config(_) => 2,
            CliError::Io { .. } => 3,
            CliError::Backend(_) => 4,
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io { path: path.into(), source }
    }
}

impl From<CoreError> for CliError {
    fn from(e: CoreError) -> Self {
        match e {
            CoreError::InvalidConfig(_)
            | CoreError::InvalidPreferences(_)
            | CoreError::InvalidModel(_)
            | CoreError::EnumerationTooLarge { .. } => CliError::Config(e.to_string()),
            other => CliError::Backend(other),
        }
    }
}
