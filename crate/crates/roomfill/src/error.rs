use std::path::{Path, PathBuf};

/// Process exit codes. Stable: scripts depend on them.
pub mod exit {
    pub const OK: i32 = 0;
    pub const VERIFY_FAILED: i32 = 1;
    pub const USAGE: i32 = 2;
    pub const NOT_CONVERGED: i32 = 3;
    pub const UNFILLABLE: i32 = 4;
}

#[derive(Debug, thiserror::Error)]
pub enum AppError {
    #[error(transparent)]
    Core(#[from] roomfill_core::Error),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {source}")]
    Wav {
        path: PathBuf,
        #[source]
        source: hound::Error,
    },

    #[error("{path}: {message}")]
    Format { path: PathBuf, message: String },

    #[error("{0}")]
    Usage(String),
}

impl AppError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        AppError::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    pub fn format(path: &Path, message: impl Into<String>) -> Self {
        AppError::Format {
            path: path.to_path_buf(),
            message: message.into(),
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            AppError::Core(roomfill_core::Error::Unfillable(_)) => exit::UNFILLABLE,
            _ => exit::USAGE,
        }
    }
}

pub type AppResult<T> = Result<T, AppError>;
