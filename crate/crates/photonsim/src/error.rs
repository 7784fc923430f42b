use std::path::PathBuf;

use thiserror::Error;

/// Failure of a command; printed as a single `error[<class>]: ...` line.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("unknown model '{name}'; known models: {known}")]
    UnknownModel { name: String, known: String },
    #[error("{path}: {field}: {message}")]
    Parse { path: PathBuf, field: String, message: String },
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{0}")]
    Limit(String),
    #[error(transparent)]
    Model(#[from] photonsim_core::Error),
}

impl CliError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io { path: path.into(), source }
    }

    pub fn class(&self) -> &'static str {
        match self {
            CliError::Usage(_) => "usage",
            CliError::UnknownModel { .. } => "unknown_model",
            CliError::Parse { .. } => "parse",
            CliError::Io { .. } => "io",
            CliError::Limit(_) => "limit",
            CliError::Model(photonsim_core::Error::Config(_)) => "config",
            CliError::Model(_) => "model",
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::UnknownModel { .. } | CliError::Parse { .. } => 3,
            CliError::Io { .. } => 4,
            CliError::Limit(_) => 5,
            CliError::Model(_) => 6,
        }
    }

    /// The one-line form written to stderr.
    pub fn line(&self) -> String {
        let msg = self.to_string().replace(['\n', '\r'], " ");
        format!("error[{}]: {}", self.class(), msg.trim())
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
