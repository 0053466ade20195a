//! Run manifests: every command that writes an output directory records the
//! invocation there for reproducibility.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use anyhow::{Context, Result};
use serde::Serialize;

#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub inputs: BTreeMap<String, String>,
    pub config: Option<String>,
    pub out_dir: String,
    pub seed: Option<u64>,
    pub tool_version: String,
    /// The only non-reproducible field, isolated here by design.
    pub generated_at_unix_s: u64,
}

impl RunManifest {
    pub fn new(command: &str, out_dir: &Path) -> Self {
        Self {
            command: command.to_string(),
            inputs: BTreeMap::new(),
            config: None,
            out_dir: out_dir.display().to_string(),
            seed: None,
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            generated_at_unix_s: SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0),
        }
    }

    pub fn input(mut self, key: &str, value: impl ToString) -> Self {
        self.inputs.insert(key.to_string(), value.to_string());
        self
    }

    pub fn config(mut self, path: Option<&Path>) -> Self {
        self.config = path.map(|p| p.display().to_string());
        self
    }

    pub fn seed(mut self, seed: u64) -> Self {
        self.seed = Some(seed);
        self
    }
}

/// Creates `dir` if needed and writes `name` into it.
pub fn write_file(dir: &Path, name: &str, bytes: &[u8]) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("create output directory {}", dir.display()))?;
    let path = dir.join(name);
    fs::write(&path, bytes).with_context(|| format!("write {}", path.display()))
}

pub fn write_manifest(dir: &Path, manifest: &RunManifest) -> Result<()> {
    let mut bytes = serde_json::to_vec_pretty(manifest).context("serialize manifest")?;
    bytes.push(b'\n');
    write_file(dir, "manifest.json", &bytes)
}
