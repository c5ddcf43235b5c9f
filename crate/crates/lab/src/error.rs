use std::path::PathBuf;

use gasket_core::Error;

#[derive(Debug, thiserror::Error)]
pub enum LabError {
    #[error(transparent)]
    Core(#[from] Error),
    #[error("config error at `{path}`: {message}")]
    Config { path: String, message: String },
    #[error("usage error: missing required fields for `{subcommand}`: {fields}")]
    Missing { subcommand: String, fields: String },
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl LabError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        LabError::Io { path: path.into(), source }
    }

    /// 2 for usage and configuration problems, 3 for capacity guards, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            LabError::Core(Error::Usage(_)) | LabError::Config { .. } | LabError::Missing { .. } => 2,
            LabError::Core(Error::Capacity(_)) => 3,
            _ => 1,
        }
    }
}

pub type LabResult<T> = Result<T, LabError>;
