//! Implementation crate for the `molkern` command-line tool.
//!
//! The binary in `main.rs` is a thin clap layer over [`commands`]; the
//! modules here own configuration ([`config`]), dataset ingestion
//! ([`data`]), and reproducibility manifests ([`manifest`]).

use std::path::PathBuf;

use thiserror::Error;

pub mod commands;
pub mod config;
pub mod data;
pub mod manifest;

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] config::ConfigError),
    #[error(transparent)]
    Data(#[from] data::DataError),
    #[error("{stage}: {message}")]
    Stage {
        stage: &'static str,
        message: String,
    },
    #[error("cannot write {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("strategy must be \"random\", \"uncertainty\", or \"true-error\", got \"{0}\"")]
    BadStrategy(String),
    #[error("{what} requires {key} in the config (or a --set override)")]
    MissingPath {
        what: &'static str,
        key: &'static str,
    },
    #[error(
        "train and test ids overlap (first offender \"{id}\"); \
         pass --allow-overlap if that is intended"
    )]
    Overlap { id: String },
    #[error("bad grid spec \"{spec}\": {reason}")]
    BadGrid { spec: String, reason: String },
    #[error("worker pool: {0}")]
    Pool(String),
}

impl CliError {
    /// Process exit code: 2 flags an unknown molecule id (so scripts can
    /// tell bad ids from pipeline failures), 1 everything else.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Data(data::DataError::UnknownId { .. }) => 2,
            _ => 1,
        }
    }
}
