//! CSV tables, run manifests and atomic file writes.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use tempfile::NamedTempFile;

use crate::args::Command;
use crate::LabError;

/// Full-precision scientific notation.
pub fn real(x: f64) -> String {
    format!("{x:e}")
}

/// A CSV table held in memory until it is written.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub header: Vec<&'static str>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(header: Vec<&'static str>) -> Self {
        Self {
            header,
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>, LabError> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.header)?;
        for row in &self.rows {
            w.write_record(row)?;
        }
        w.into_inner().map_err(|e| LabError::Io(e.into_error()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub parameters: Command,
    pub seed: u64,
    pub outputs: Vec<PathBuf>,
    pub version: String,
    /// Seconds since the Unix epoch.
    pub timestamp: u64,
}

impl RunManifest {
    pub fn new(parameters: Command, outputs: Vec<PathBuf>) -> Self {
        let seed = parameters.common().map_or(0, |c| c.seed);
        Self {
            command: parameters.name().into(),
            parameters,
            seed,
            outputs,
            version: env!("CARGO_PKG_VERSION").into(),
            timestamp: SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map_or(0, |d| d.as_secs()),
        }
    }

    pub fn load(path: &Path) -> Result<Self, LabError> {
        let text = std::fs::read_to_string(path)?;
        Ok(serde_json::from_str(&text)?)
    }
}

/// `<out>.manifest.json`.
pub fn manifest_path(out: &Path) -> PathBuf {
    let mut name = out.as_os_str().to_owned();
    name.push(".manifest.json");
    PathBuf::from(name)
}

fn staged(path: &Path, bytes: &[u8]) -> Result<NamedTempFile, LabError> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    Ok(tmp)
}

/// Writes the table and its manifest. Both are staged next to their targets
/// and renamed into place only once both are complete.
pub fn publish(table: &Table, out: &Path, parameters: Command) -> Result<RunManifest, LabError> {
    let manifest = RunManifest::new(parameters, vec![out.to_path_buf()]);
    let csv = staged(out, &table.to_bytes()?)?;
    let json = staged(
        &manifest_path(out),
        serde_json::to_string_pretty(&manifest)?.as_bytes(),
    )?;
    csv.persist(out).map_err(|e| LabError::Io(e.error))?;
    json.persist(manifest_path(out))
        .map_err(|e| LabError::Io(e.error))?;
    Ok(manifest)
}
