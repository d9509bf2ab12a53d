//! Provenance manifest embedded in every report.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InputHash {
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub seed: u64,
    /// sha256 of the effective configuration JSON.
    pub config_hash: String,
    pub inputs: Vec<InputHash>,
    /// Omitted by default so identical runs produce identical bytes;
    /// populate explicitly when wall-clock provenance matters more than
    /// reproducibility.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub timestamp: Option<String>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn hash_file(path: &Path) -> anyhow::Result<InputHash> {
    let bytes = std::fs::read(path)?;
    Ok(InputHash { path: path.display().to_string(), sha256: sha256_hex(&bytes) })
}

impl RunManifest {
    pub fn new(seed: u64, config_json: &str, inputs: Vec<InputHash>) -> Self {
        Self {
            tool: "qstrat".to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            seed,
            config_hash: sha256_hex(config_json.as_bytes()),
            inputs,
            timestamp: None,
        }
    }
}
