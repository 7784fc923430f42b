use alloc::string::String;

/// Errors produced by the simulator and the accounting model.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid model configuration: {0}")]
    Config(String),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("contract violation: {0}")]
    Contract(String),
    #[error("invalid lookup table: {0}")]
    Lut(String),
}

pub type Result<T> = core::result::Result<T, Error>;
