use thiserror::Error;

/// Errors produced by the coding and simulation routines.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("unsupported: {0}")]
    Unsupported(String),
    /// Exhaustive enumeration was asked for a block longer than it can handle.
    #[error("block length {n} exceeds the exhaustive enumeration limit of {max}")]
    OracleScale { n: usize, max: usize },
    /// Dirt cannot be recovered because `1 - alpha` vanishes or is negative.
    #[error("dirt is unrecoverable with alpha = {0} (requires alpha < 1)")]
    UnrecoverableConfiguration(f64),
    #[error("config: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::InvalidArgument(msg.into()))
}
