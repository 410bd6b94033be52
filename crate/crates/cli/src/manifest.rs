use std::collections::BTreeMap;
use std::path::Path;

use anyhow::Context;
use serde::Serialize;
use serde_json::Value;
use sha2::{Digest, Sha256};

/// Everything needed to reproduce a run. The hash covers all fields except wall time.
#[derive(Clone, Debug, Serialize)]
pub struct RunManifest {
    pub command_line: Vec<String>,
    pub ifs_sha256: Option<String>,
    pub version: String,
    pub seeds: BTreeMap<String, u64>,
    pub tolerances: BTreeMap<String, Value>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub wall_time_s: Option<f64>,
}

impl RunManifest {
    pub fn new(command_line: Vec<String>) -> Self {
        RunManifest {
            command_line,
            ifs_sha256: None,
            version: env!("CARGO_PKG_VERSION").to_string(),
            seeds: BTreeMap::new(),
            tolerances: BTreeMap::new(),
            wall_time_s: None,
        }
    }

    pub fn hash_ifs(&mut self, path: &Path) -> anyhow::Result<()> {
        let bytes = std::fs::read(path).with_context(|| format!("reading {}", path.display()))?;
        self.ifs_sha256 = Some(hex::encode(Sha256::digest(&bytes)));
        Ok(())
    }

    pub fn tol(&mut self, name: &str, value: impl Into<Value>) {
        self.tolerances.insert(name.to_string(), value.into());
    }

    pub fn seed(&mut self, name: &str, value: u64) {
        self.seeds.insert(name.to_string(), value);
    }

    pub fn hash(&self) -> String {
        let stable = RunManifest {
            wall_time_s: None,
            ..self.clone()
        };
        let text = serde_json::to_string(&stable).expect("manifest serializes");
        hex::encode(Sha256::digest(text.as_bytes()))
    }

    pub fn header(&self) -> String {
        format!("manifest_sha256={}", self.hash())
    }
}
