use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum AppError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
    #[error("invalid configuration: {0}")]
    Config(String),
    /// Analysis did not certify the request (unstable system, infeasible
    /// small-gain condition, β outside the certified range).
    #[error("{0}")]
    Infeasible(String),
    #[error(transparent)]
    Core(#[from] afdr_core::Error),
}

impl AppError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Self::Io {
            path: path.into(),
            source,
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Infeasible(_) => 2,
            Self::Core(afdr_core::Error::Unstable { .. }) => 2,
            Self::Core(afdr_core::Error::NormNotConverged { .. }) => 2,
            _ => 1,
        }
    }
}

pub type Result<T> = std::result::Result<T, AppError>;
