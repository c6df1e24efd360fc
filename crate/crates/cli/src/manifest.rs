use crate::config::{file_sha256, RunConfig};
use crate::Invalid;
use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputFile {
    pub role: String,
    pub path: PathBuf,
    pub sha256: String,
}

/// Record of one invocation, written into the output directory before any
/// other output so failed runs still leave a trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub argv: Vec<String>,
    pub version: String,
    pub seed: u64,
    pub config_hash: String,
    pub config: RunConfig,
    pub inputs: Vec<InputFile>,
    /// Paths relative to the output directory.
    pub outputs: Vec<String>,
}

impl RunManifest {
    pub fn write(&self, out: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self)?;
        std::fs::write(out.join(MANIFEST_FILE), text + "\n").context("writing manifest")
    }

    pub fn load(path: &Path) -> Result<RunManifest> {
        let path = if path.is_dir() {
            path.join(MANIFEST_FILE)
        } else {
            path.to_path_buf()
        };
        let text = std::fs::read_to_string(&path)
            .map_err(|e| Invalid(format!("cannot read manifest {}: {e}", path.display())))?;
        let m: RunManifest = serde_json::from_str(&text).map_err(|e| Invalid(format!("bad manifest: {e}")))?;
        if m.config.hash() != m.config_hash {
            return Err(Invalid("manifest config does not match its hash".into()).into());
        }
        Ok(m)
    }

    /// Fails if an input changed since the manifest was written.
    pub fn verify_inputs(&self) -> Result<()> {
        for input in &self.inputs {
            if hash_input(&input.path)? != input.sha256 {
                return Err(Invalid(format!("input {} changed since the recorded run", input.path.display())).into());
            }
        }
        Ok(())
    }

    pub fn input(&self, role: &str) -> Option<&Path> {
        self.inputs.iter().find(|i| i.role == role).map(|i| i.path.as_path())
    }
}

/// SHA-256 of a file, or of a directory's files (name and contents, sorted
/// by name).
pub fn hash_input(path: &Path) -> Result<String> {
    if !path.is_dir() {
        return Ok(file_sha256(&read_bytes(path)?));
    }
    let mut entries: Vec<PathBuf> = std::fs::read_dir(path)
        .map_err(|e| Invalid(format!("cannot read {}: {e}", path.display())))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_file())
        .collect();
    entries.sort();
    let mut all = Vec::new();
    for e in entries {
        all.extend(e.file_name().unwrap_or_default().as_encoded_bytes());
        all.push(0);
        all.extend(read_bytes(&e)?);
    }
    Ok(file_sha256(&all))
}

/// Reads a user-supplied file; failures are the caller's fault.
pub fn read_bytes(path: &Path) -> Result<Vec<u8>> {
    std::fs::read(path).map_err(|e| Invalid(format!("cannot read {}: {e}", path.display())).into())
}
