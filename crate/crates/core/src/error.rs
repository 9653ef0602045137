//! Crate-wide error type.
//!
//! Variants partition failures the same way the CLI's exit codes do:
//! configuration problems, data problems, and numeric problems.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Invalid configuration value (bad hyperparameter, bad flag combination).
    #[error("config error: {0}")]
    Config(String),

    /// Malformed or unusable input data.
    #[error("data error: {0}")]
    Data(String),

    /// A non-finite value was produced where a finite one is required.
    #[error("numeric error: {0}")]
    Numeric(String),

    /// Inconsistent structure: layout mismatches, missing segments, bad graph use.
    #[error("structural error: {0}")]
    Structural(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Process exit code for this failure class: 1 config/structural,
    /// 2 data/io, 3 numeric.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::Structural(_) => 1,
            Error::Data(_) | Error::Io(_) => 2,
            Error::Numeric(_) => 3,
        }
    }
}
