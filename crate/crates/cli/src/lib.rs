//! Operator-facing layer over the screenaudit library.
//!
//! One TOML file describes an audit; each subcommand runs one stage of the
//! pipeline against the artifact store that file names. Stages only read
//! what earlier stages wrote and only write under their own subdirectory,
//! so a run is resumable, each artifact is inspectable, and re-running any
//! stage with an unchanged config reproduces its output byte for byte.

use thiserror::Error;

pub mod commands;
pub mod config;

pub use commands::{
    cmd_diff, cmd_evaluate, cmd_generate, cmd_ingest, cmd_report, cmd_score, ingest_document,
    JobDocument,
};
pub use config::{AuditConfig, ConfigFile, Overrides};

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Model(#[from] screenaudit::model::ModelError),
    #[error(transparent)]
    Gen(#[from] screenaudit::gensuite::GenError),
    #[error(transparent)]
    Judge(#[from] screenaudit::judge::JudgeError),
    #[error(transparent)]
    Report(#[from] screenaudit::report::ReportError),
    #[error("{0}")]
    Config(String),
    #[error("missing artifact {path}; run `{produced_by}` first")]
    MissingArtifact { path: String, produced_by: String },
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {detail}")]
    Parse { path: String, detail: String },
}
