//! Run manifests: every command records its configuration, seed, and the
//! hashes of the artifacts it wrote, so any output can be traced back to
//! the exact invocation that produced it.

use std::path::{Path, PathBuf};

use anyhow::Result;
use serde::Serialize;

#[derive(Serialize)]
pub struct ArtifactEntry {
    pub path: String,
    pub bytes: u64,
    pub fnv1a64: String,
}

#[derive(Serialize)]
pub struct Manifest {
    pub command: String,
    pub config: serde_json::Value,
    pub config_hash: String,
    pub seed: u64,
    pub artifacts: Vec<ArtifactEntry>,
}

/// FNV-1a over arbitrary bytes; good enough to fingerprint artifacts.
pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut hash = 0xcbf2_9ce4_8422_2325u64;
    for &b in bytes {
        hash ^= b as u64;
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    hash
}

impl Manifest {
    pub fn new(command: &str, config: serde_json::Value, seed: u64) -> Self {
        let config_hash = format!("{:016x}", fnv1a64(config.to_string().as_bytes()));
        Manifest { command: command.to_string(), config, config_hash, seed, artifacts: Vec::new() }
    }

    pub fn record(&mut self, path: &Path) -> Result<()> {
        let bytes = std::fs::read(path)?;
        self.artifacts.push(ArtifactEntry {
            path: path.display().to_string(),
            bytes: bytes.len() as u64,
            fnv1a64: format!("{:016x}", fnv1a64(&bytes)),
        });
        Ok(())
    }

    /// Write `<stem>.manifest.json` next to the primary artifact.
    pub fn write_next_to(&self, primary: &Path) -> Result<PathBuf> {
        let path = primary.with_extension("manifest.json");
        std::fs::write(&path, serde_json::to_string_pretty(self)?)?;
        Ok(path)
    }
}
