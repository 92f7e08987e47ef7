//! Run manifests for auditable, reproducible outputs.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::HarnessError;

/// Git-style blob hash of a byte string: sha256("blob <len>\0<bytes>").
pub fn content_hash(bytes: &[u8]) -> String {
    let mut hasher = Sha256::new();
    hasher.update(format!("blob {}\0", bytes.len()).as_bytes());
    hasher.update(bytes);
    format!("{:x}", hasher.finalize())
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    pub command: String,
    pub config: serde_json::Value,
    /// Blob hash of the serialized config.
    pub config_hash: String,
    pub seeds: Vec<u64>,
    /// File name -> blob hash of the written contents.
    pub outputs: std::collections::BTreeMap<String, String>,
}

impl Manifest {
    pub fn new(command: &str, config: serde_json::Value, seeds: Vec<u64>) -> Self {
        let bytes = serde_json::to_vec(&config).expect("config serializes");
        Self {
            command: command.to_string(),
            config_hash: content_hash(&bytes),
            config,
            seeds,
            outputs: Default::default(),
        }
    }

    pub fn record_output(&mut self, name: &str, contents: &[u8]) {
        self.outputs
            .insert(name.to_string(), content_hash(contents));
    }
}

/// Writes `manifest.json` alongside the run outputs.
pub fn write_manifest(dir: &Path, manifest: &Manifest) -> Result<(), HarnessError> {
    let json = serde_json::to_string_pretty(manifest)?;
    std::fs::write(dir.join("manifest.json"), json)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn blob_hash_is_stable_and_length_framed() {
        let a = content_hash(b"hello");
        assert_eq!(a, content_hash(b"hello"));
        assert_eq!(a.len(), 64);
        // framing includes the length, so a plain digest of the bytes differs
        let plain = {
            let mut h = Sha256::new();
            h.update(b"hello");
            format!("{:x}", h.finalize())
        };
        assert_ne!(a, plain);
    }

    #[test]
    fn identical_configs_hash_identically() {
        let a = Manifest::new("detect", serde_json::json!({"grid": 8, "seed": 1}), vec![1]);
        let b = Manifest::new("detect", serde_json::json!({"grid": 8, "seed": 1}), vec![1]);
        assert_eq!(a.config_hash, b.config_hash);
        let c = Manifest::new("detect", serde_json::json!({"grid": 9, "seed": 1}), vec![1]);
        assert_ne!(a.config_hash, c.config_hash);
    }
}
