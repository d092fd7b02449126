//! Run manifests: what a command read, what it wrote, and with which
//! settings. The wall-clock time goes to a separate file so that re-running
//! a command reproduces its manifest byte for byte.

use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use anyhow::{Context, Result};
use serde::Serialize;
use sha2::{Digest, Sha256};

#[derive(Serialize)]
struct FileDigest {
    path: String,
    sha256: String,
}

#[derive(Serialize)]
struct RunManifest<'a> {
    command: &'a str,
    tool_version: &'a str,
    config_sha256: String,
    config: &'a serde_json::Value,
    inputs: Vec<FileDigest>,
    outputs: Vec<FileDigest>,
}

/// Inputs, outputs and effective settings of one command invocation.
pub struct Run {
    pub command: &'static str,
    pub config: serde_json::Value,
    pub inputs: Vec<PathBuf>,
    pub outputs: Vec<PathBuf>,
}

impl Run {
    pub fn new(command: &'static str, config: serde_json::Value) -> Self {
        Self {
            command,
            config,
            inputs: Vec::new(),
            outputs: Vec::new(),
        }
    }

    pub fn input(&mut self, path: impl Into<PathBuf>) {
        self.inputs.push(path.into());
    }

    pub fn output(&mut self, path: impl Into<PathBuf>) {
        self.outputs.push(path.into());
    }

    /// Writes `<dir>/<name>.manifest.json` and `<dir>/<name>.timestamp`.
    pub fn write(&self, dir: &Path, name: &str) -> Result<PathBuf> {
        let digest = |paths: &[PathBuf]| -> Result<Vec<FileDigest>> {
            paths
                .iter()
                .map(|p| {
                    let bytes = std::fs::read(p).with_context(|| format!("reading {} for its digest", p.display()))?;
                    Ok(FileDigest {
                        path: p.display().to_string(),
                        sha256: sha256_hex(&bytes),
                    })
                })
                .collect()
        };
        let manifest = RunManifest {
            command: self.command,
            tool_version: env!("CARGO_PKG_VERSION"),
            config_sha256: sha256_hex(&serde_json::to_vec(&self.config)?),
            config: &self.config,
            inputs: digest(&self.inputs)?,
            outputs: digest(&self.outputs)?,
        };
        let path = dir.join(format!("{name}.manifest.json"));
        let mut text = serde_json::to_string_pretty(&manifest)?;
        text.push('\n');
        std::fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?;
        let secs = SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0);
        let stamp = dir.join(format!("{name}.timestamp"));
        std::fs::write(&stamp, format!("unix_seconds={secs}\n"))
            .with_context(|| format!("writing {}", stamp.display()))?;
        Ok(path)
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}
