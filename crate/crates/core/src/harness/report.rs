//! Run metadata attached to every output.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::Result;
use crate::imaging::CODEC_IDENTITY;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMetadata {
    pub version: String,
    pub seed: u64,
    pub config: serde_json::Value,
    /// Hex SHA-256 of the compact JSON encoding of `config`.
    pub config_hash: String,
    pub codec: String,
}

impl RunMetadata {
    pub fn new<C: Serialize>(seed: u64, config: &C) -> Result<Self> {
        let config = serde_json::to_value(config)?;
        let digest = Sha256::digest(serde_json::to_vec(&config)?);
        Ok(Self {
            version: env!("CARGO_PKG_VERSION").to_string(),
            seed,
            config,
            config_hash: digest.iter().map(|b| format!("{b:02x}")).collect(),
            codec: CODEC_IDENTITY.to_string(),
        })
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Report<T> {
    pub metadata: RunMetadata,
    pub result: T,
}

/// Pretty JSON with a `metadata` block next to `result`.
pub fn write_report<T: Serialize>(path: impl AsRef<Path>, metadata: &RunMetadata, result: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(&serde_json::json!({ "metadata": metadata, "result": result }))?;
    std::fs::write(path, text + "\n")?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hash_follows_config() {
        let a = RunMetadata::new(1, &serde_json::json!({"bins": 256})).unwrap();
        let b = RunMetadata::new(2, &serde_json::json!({"bins": 256})).unwrap();
        let c = RunMetadata::new(1, &serde_json::json!({"bins": 128})).unwrap();
        assert_eq!(a.config_hash, b.config_hash);
        assert_ne!(a.config_hash, c.config_hash);
        assert_eq!(a.config_hash.len(), 64);
    }

    #[test]
    fn report_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("r.json");
        let meta = RunMetadata::new(3, &[1, 2]).unwrap();
        write_report(&path, &meta, &0.75).unwrap();
        let back: Report<f64> = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
        assert_eq!(back.metadata, meta);
        assert_eq!(back.result, 0.75);
    }
}
