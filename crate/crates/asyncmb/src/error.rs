use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, AppError>;

#[derive(Debug, Error)]
pub enum AppError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: {msg}")]
    Parse {
        path: PathBuf,
        line: usize,
        msg: String,
    },
    #[error("config: {field}: {msg}")]
    Config { field: String, msg: String },
    #[error(transparent)]
    Core(#[from] asyncmb_core::Error),
    #[error("{0}")]
    Runtime(String),
    #[error("bound violated: {0}")]
    BoundViolation(String),
}

impl AppError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        AppError::Io {
            path: path.into(),
            source,
        }
    }

    pub fn config(field: impl Into<String>, msg: impl Into<String>) -> Self {
        AppError::Config {
            field: field.into(),
            msg: msg.into(),
        }
    }

    /// Process exit code for this error.
    pub fn exit_code(&self) -> i32 {
        match self {
            AppError::Config { .. } => 2,
            AppError::Core(
                asyncmb_core::Error::Config(_) | asyncmb_core::Error::MissingParam(_),
            ) => 2,
            AppError::BoundViolation(_) => 4,
            _ => 3,
        }
    }
}
