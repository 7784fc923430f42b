use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::Result;
use crate::io;

/// Provenance of one command run; written next to its outputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    /// Arguments (after the program name) that reproduce the run.
    pub argv: Vec<String>,
    /// Effective settings after applying flags, files and defaults.
    pub resolved: Value,
    pub config_paths: Vec<String>,
    pub seed: u64,
    pub outputs: Vec<String>,
    pub version: String,
    /// Seconds since the Unix epoch; `SOURCE_DATE_EPOCH` overrides the clock.
    pub timestamp: u64,
}

pub fn timestamp() -> u64 {
    std::env::var("SOURCE_DATE_EPOCH")
        .ok()
        .and_then(|s| s.parse().ok())
        .unwrap_or_else(|| SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0))
}

pub fn manifest_path(out_dir: &Path, command: &str) -> PathBuf {
    out_dir.join(format!("{command}.manifest.json"))
}

pub fn write(path: &Path, manifest: &RunManifest) -> Result<()> {
    io::write_atomic(path, &io::json_bytes(manifest))
}

pub fn read(path: &Path) -> Result<RunManifest> {
    io::read_json(path)
}
