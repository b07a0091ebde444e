//! Run manifests. Every command that writes artifacts drops a JSON
//! manifest next to its primary output recording the exact command,
//! resolved configuration, input digest and seed; re-running the listed
//! command with that seed reproduces the outputs byte for byte.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

#[derive(Serialize)]
pub struct RunManifest {
    /// Tool name and version that produced the outputs.
    pub tool: String,
    /// Argv as invoked.
    pub command: Vec<String>,
    /// Resolved seed, when any randomness was involved.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    /// Primary input file and its SHA-256, when the command takes one.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub input: Option<InputDigest>,
    /// Every tolerance and switch after defaults were applied.
    pub config: serde_json::Value,
    /// Paths written, relative to the invocation directory.
    pub outputs: Vec<String>,
    pub wall_seconds: f64,
}

#[derive(Serialize)]
pub struct InputDigest {
    pub path: String,
    pub sha256: String,
}

pub fn tool_version() -> String {
    format!("fdn-modal {}", env!("CARGO_PKG_VERSION"))
}

pub fn digest_file(path: &Path) -> Result<InputDigest, String> {
    let bytes = fs::read(path).map_err(|e| format!("cannot read {}: {e}", path.display()))?;
    let mut hasher = Sha256::new();
    hasher.update(&bytes);
    Ok(InputDigest {
        path: path.display().to_string(),
        sha256: format!("{:x}", hasher.finalize()),
    })
}

/// Manifest path for a primary output: `modes.csv` → `modes.manifest.json`.
pub fn manifest_path(primary_output: &Path) -> PathBuf {
    primary_output.with_extension("manifest.json")
}

pub fn write_manifest(path: &Path, manifest: &RunManifest) -> Result<(), String> {
    let mut text = serde_json::to_string_pretty(manifest)
        .map_err(|e| format!("cannot encode manifest: {e}"))?;
    text.push('\n');
    fs::write(path, text).map_err(|e| format!("cannot write {}: {e}", path.display()))
}
