use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),

    #[error("{} already exists; pass --force to replace it", .0.display())]
    Exists(PathBuf),

    #[error("invalid config {path}: {message}")]
    Config { path: PathBuf, message: String },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("plot failed: {0}")]
    Plot(String),

    #[error(transparent)]
    Core(#[from] rehab_contrast::Error),
}

pub type CliResult<T> = Result<T, CliError>;

impl CliError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }

    /// 2 for problems with the invocation or its inputs, 1 for failures while running.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) | CliError::Exists(_) | CliError::Config { .. } => 2,
            CliError::Core(rehab_contrast::Error::Usage(_)) => 2,
            _ => 1,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Usage(_) => "usage",
            CliError::Exists(_) => "exists",
            CliError::Config { .. } => "config",
            CliError::Io { .. } => "io",
            CliError::Plot(_) => "plot",
            CliError::Core(e) => e.kind(),
        }
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "error": self.kind(),
            "message": self.to_string(),
            "exit_code": self.exit_code(),
        })
    }
}
