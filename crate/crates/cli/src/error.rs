use std::path::Path;

use roadclust_core::ErrorClass;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Core(#[from] roadclust_core::Error),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.display().to_string(),
            source,
        }
    }

    /// 2 usage, 3 invalid data, 4 unmet algorithmic precondition, 5 I/O.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Core(e) => match e.class() {
                ErrorClass::Validation => 3,
                ErrorClass::Precondition => 4,
                ErrorClass::Io => 5,
            },
            CliError::Io { .. } => 5,
        }
    }
}
