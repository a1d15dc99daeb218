//! Run manifests: a JSON record of what a command read, what it wrote
//! (with content hashes), the configuration it ran under, and every seed it
//! used, so reruns can be checked for bit-identical outputs.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use super::{internal, PipelineError, Result};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FileHash {
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub config: serde_json::Value,
    pub inputs: Vec<FileHash>,
    pub outputs: Vec<FileHash>,
    pub seeds: BTreeMap<String, u64>,
    pub wall_time_s: f64,
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path)
        .map_err(|e| PipelineError::Internal(format!("hashing {}: {e}", path.display())))?;
    Ok(format!("{:x}", Sha256::digest(&bytes)))
}

/// Collects paths while a command runs, then hashes everything at the end.
pub struct ManifestBuilder {
    command: String,
    config: serde_json::Value,
    inputs: Vec<PathBuf>,
    outputs: Vec<PathBuf>,
    seeds: BTreeMap<String, u64>,
    started: Instant,
}

impl ManifestBuilder {
    pub fn new<C: Serialize>(command: &str, config_echo: &C) -> Result<Self> {
        Ok(ManifestBuilder {
            command: command.into(),
            config: serde_json::to_value(config_echo).map_err(internal)?,
            inputs: Vec::new(),
            outputs: Vec::new(),
            seeds: BTreeMap::new(),
            started: Instant::now(),
        })
    }

    pub fn input(&mut self, path: &Path) {
        self.inputs.push(path.to_path_buf());
    }

    pub fn output(&mut self, path: &Path) {
        self.outputs.push(path.to_path_buf());
    }

    pub fn seed(&mut self, name: &str, value: u64) {
        self.seeds.insert(name.into(), value);
    }

    /// Hashes all recorded files and writes `<command>_manifest.json` into
    /// `out_dir`. Returns the manifest path.
    pub fn write(self, out_dir: &Path) -> Result<PathBuf> {
        let hash_all = |paths: &[PathBuf]| -> Result<Vec<FileHash>> {
            paths
                .iter()
                .map(|p| {
                    Ok(FileHash { path: p.display().to_string(), sha256: sha256_file(p)? })
                })
                .collect()
        };
        let manifest = RunManifest {
            command: self.command.clone(),
            config: self.config,
            inputs: hash_all(&self.inputs)?,
            outputs: hash_all(&self.outputs)?,
            seeds: self.seeds,
            wall_time_s: self.started.elapsed().as_secs_f64(),
        };
        let path = out_dir.join(format!("{}_manifest.json", self.command));
        let text = serde_json::to_string_pretty(&manifest).map_err(internal)?;
        std::fs::write(&path, text)
            .map_err(|e| PipelineError::Internal(format!("writing {}: {e}", path.display())))?;
        Ok(path)
    }
}
