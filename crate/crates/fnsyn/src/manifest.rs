//! Run manifest: what ran, with which resolved configuration, and what it wrote.

use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};
use crate::table::write_atomic;

pub const MANIFEST_NAME: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub subcommand: String,
    pub config: serde_json::Value,
    pub seeds: Vec<u64>,
    /// Seconds since the Unix epoch.
    pub started: f64,
    pub finished: f64,
    /// Paths relative to the output directory.
    pub outputs: Vec<String>,
}

pub fn now() -> f64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs_f64()).unwrap_or(0.0)
}

impl RunManifest {
    pub fn begin(subcommand: &str, config: serde_json::Value, seeds: Vec<u64>) -> Self {
        Self { subcommand: subcommand.into(), config, seeds, started: now(), finished: f64::NAN, outputs: Vec::new() }
    }

    pub fn record(&mut self, dir: &Path, file: &Path) {
        let rel = file.strip_prefix(dir).unwrap_or(file);
        self.outputs.push(rel.to_string_lossy().into_owned());
    }

    /// Stamps the end time and writes `manifest.json` atomically. Fails if a
    /// listed output is missing.
    pub fn finish(mut self, dir: &Path) -> CliResult<PathBuf> {
        for o in &self.outputs {
            if !dir.join(o).exists() {
                return Err(CliError::Input(format!("manifest lists missing output {o}")));
            }
        }
        self.finished = now();
        let path = dir.join(MANIFEST_NAME);
        let json = serde_json::to_vec_pretty(&self).map_err(|e| CliError::Input(e.to_string()))?;
        write_atomic(&path, &json)?;
        Ok(path)
    }

    pub fn read(dir: &Path) -> CliResult<Self> {
        let path = dir.join(MANIFEST_NAME);
        let bytes = std::fs::read(&path).map_err(|e| CliError::missing(&path, e))?;
        serde_json::from_slice(&bytes).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
    }
}
