//! The `sofri` command-line tool: ingest, fit, summarize and simulate.

use std::path::PathBuf;

use serde::Serialize;
use sofri_core::delta::DeltaError;
use sofri_core::fda::FdaError;
use sofri_core::io::IoError;
use sofri_core::model::ModelError;
use sofri_core::pipeline::PipelineError;
use sofri_core::posterior::PosteriorError;
use sofri_core::simulate::SimError;
use thiserror::Error;

pub mod args;
pub mod commands;
pub mod config;
pub mod ingest;
pub mod output;

pub use args::{Cli, Command};

/// Crate version plus the commit the binary was built from.
pub const BUILD_ID: &str = concat!(env!("CARGO_PKG_VERSION"), "+", env!("SOFRI_GIT_HASH"));

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{}: {message}", path.display())]
    Config { path: PathBuf, message: String },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("id `{id}` in {} has no partner in the other inputs", path.display())]
    IdMismatch { id: String, path: PathBuf },
    #[error("{}: log2 undefined for curve `{id}` at s = {s}: value {value}", path.display())]
    DomainError {
        path: PathBuf,
        id: String,
        s: f64,
        value: f64,
    },
    #[error("W and M are observed on different grids")]
    GridMismatch,
    #[error(transparent)]
    Io(#[from] IoError),
    #[error(transparent)]
    Fda(#[from] FdaError),
    #[error(transparent)]
    Delta(#[from] DeltaError),
    #[error(transparent)]
    Pipeline(#[from] PipelineError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Posterior(#[from] PosteriorError),
    #[error(transparent)]
    Sim(#[from] SimError),
}

impl CliError {
    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Config { .. } => "ConfigError",
            CliError::InvalidConfig(_) => "InvalidConfig",
            CliError::IdMismatch { .. } => "IdMismatch",
            CliError::DomainError { .. } => "DomainError",
            CliError::GridMismatch => "GridMismatch",
            CliError::Io(IoError::Io { .. }) => "IoError",
            CliError::Io(IoError::NonNumericCell { .. }) => "NonNumericCell",
            CliError::Io(IoError::DuplicateId { .. }) => "DuplicateId",
            CliError::Io(_) => "MalformedInput",
            CliError::Fda(_) => "FdaError",
            CliError::Delta(_) => "DeltaError",
            CliError::Pipeline(_) => "PipelineError",
            CliError::Model(_) => "ModelError",
            CliError::Posterior(_) => "PosteriorError",
            CliError::Sim(_) => "SimulationError",
        }
    }

    /// One-line JSON for stderr.
    pub fn to_json(&self) -> String {
        #[derive(Serialize)]
        struct Report<'a> {
            error: &'a str,
            message: String,
        }
        serde_json::to_string(&Report {
            error: self.kind(),
            message: self.to_string(),
        })
        .expect("plain strings serialize")
    }
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Fit(a) => commands::fit(a),
        Command::Simulate(a) => commands::simulate(a),
        Command::Delta(a) => commands::delta(a),
        Command::Summarize(a) => commands::summarize(a),
    }
}
