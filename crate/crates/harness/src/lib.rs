//! Experiment orchestration around `inl-core`: configuration, drivers,
//! summary statistics, and file output with run manifests.
//!
//! The `inl` binary is a thin shell over [`runner::run`]. Everything it
//! does is reachable from here, so integration tests can run experiments
//! in-process and only touch the binary for exit codes and byte-level
//! output checks.

pub mod config;
pub mod output;
pub mod runner;
pub mod stats;

use std::io;

/// Errors are split by exit code: configuration problems exit 2,
/// everything that happens after a valid config exits 3.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{0}")]
    Config(String),

    #[error(transparent)]
    Numeric(#[from] inl_core::Error),

    #[error("io: {0}")]
    Io(#[from] io::Error),
}

impl Error {
    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) => 2,
            Error::Numeric(_) | Error::Io(_) => 3,
        }
    }

    /// Stable tag for the machine-readable error record.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Config(_) => "config",
            Error::Numeric(_) => "numeric",
            Error::Io(_) => "io",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
