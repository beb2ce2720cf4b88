//! Command-line experiments over `mmrope-core`.
//!
//! Every command writes one CSV and a `<csv>.manifest.json` holding the
//! resolved parameters; `replay` re-runs a manifest and reproduces the CSV
//! byte for byte.

pub mod args;
pub mod commands;
pub mod output;

use std::path::PathBuf;

use thiserror::Error;

use args::Command;
use output::{publish, RunManifest};

#[derive(Debug, Error)]
pub enum LabError {
    #[error("{0}")]
    Validation(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("manifest error: {0}")]
    Manifest(#[from] serde_json::Error),
}

impl LabError {
    /// 2 for invalid input, 3 for failures while running.
    pub fn exit_code(&self) -> i32 {
        match self {
            LabError::Validation(_) | LabError::Manifest(_) => 2,
            LabError::Io(_) | LabError::Csv(_) => 3,
        }
    }
}

macro_rules! validation_from {
    ($($t:ty),*) => {$(
        impl From<$t> for LabError {
            fn from(e: $t) -> Self {
                LabError::Validation(e.to_string())
            }
        }
    )*};
}

validation_from!(
    mmrope_core::AllocError,
    mmrope_core::LayoutError,
    mmrope_core::AnalysisError,
    mmrope_core::NiahError,
    mmrope_core::RotaryError
);

/// Result of one command.
#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub out: PathBuf,
    pub manifest: RunManifest,
    pub summary: Vec<String>,
}

/// Runs `command`, writing its CSV and manifest.
pub fn run(command: Command) -> Result<Report, LabError> {
    let mut command = match command {
        Command::Replay(r) => {
            let mut recorded = RunManifest::load(&r.manifest)?.parameters;
            if let Some(out) = r.out {
                recorded
                    .common_mut()
                    .ok_or_else(|| LabError::Validation("manifest cannot be replayed".into()))?
                    .out = Some(out);
            }
            recorded
        }
        other => other,
    };
    let name = command.name();
    let out = command
        .common_mut()
        .ok_or_else(|| LabError::Validation("nested replay".into()))?
        .out
        .get_or_insert_with(|| PathBuf::from(format!("{name}.csv")))
        .clone();
    let outcome = match &command {
        Command::Alloc(a) => commands::alloc(a),
        Command::Margin(a) => commands::margin(a),
        Command::Critical(a) => commands::critical(a),
        Command::Indices(a) => commands::indices(a),
        Command::Niah(a) => commands::niah(a),
        Command::Distortion(a) => commands::distortion(a),
        Command::Pneg(a) => commands::pneg(a),
        Command::Scores(a) => commands::scores(a),
        Command::Replay(_) => unreachable!("replays are resolved above"),
    }?;
    let manifest = publish(&outcome.table, &out, command)?;
    Ok(Report {
        out,
        manifest,
        summary: outcome.summary,
    })
}
