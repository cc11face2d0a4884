use std::fs;
use std::path::Path;

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::commands::CliError;

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub tool_version: String,
    pub schema: String,
    pub scenario: String,
    /// Where the scenario came from: a file path or `builtin:<name>`.
    pub config_source: String,
    /// The resolved config that was run, inside the output directory.
    pub config_path: String,
    pub config_sha256: String,
    pub resolved_seed: u64,
    pub output_dir: String,
    pub artifacts: Vec<String>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// Writes the manifest after checking every listed artifact is on disk.
pub fn write_manifest(dir: &Path, manifest: &RunManifest) -> Result<(), CliError> {
    for name in &manifest.artifacts {
        if !dir.join(name).is_file() {
            return Err(CliError::io(format!("artifact {name} missing from {}", dir.display())));
        }
    }
    let text = serde_json::to_string_pretty(manifest).expect("manifest serializes");
    let path = dir.join(MANIFEST_FILE);
    fs::write(&path, text + "\n").map_err(|e| CliError::io(format!("{}: {e}", path.display())))
}
