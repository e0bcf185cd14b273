//! Provenance records written next to every command's outputs.

use std::collections::BTreeMap;
use std::path::Path;

use anyhow::{Context, Result};
use ecgnet_core::data::{sha256_hex, DATABASE_CSV, STATEMENTS_CSV};
use serde::Serialize;

use crate::config::RunConfig;

pub const CODE_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, Serialize)]
pub struct Provenance {
    pub command: String,
    pub code_version: String,
    pub seed: u64,
    pub config: RunConfig,
    /// Input name → SHA-256.
    pub inputs: BTreeMap<String, String>,
    /// Output file name (relative to the output directory) → SHA-256.
    pub outputs: BTreeMap<String, String>,
    #[serde(skip_serializing_if = "BTreeMap::is_empty")]
    pub notes: BTreeMap<String, String>,
}

impl Provenance {
    pub fn new(command: &str, config: &RunConfig) -> Self {
        Provenance {
            command: command.to_string(),
            code_version: CODE_VERSION.to_string(),
            seed: config.seed,
            config: config.clone(),
            inputs: BTreeMap::new(),
            outputs: BTreeMap::new(),
            notes: BTreeMap::new(),
        }
    }

    /// Fingerprints both index CSVs of a corpus.
    pub fn with_corpus(mut self, root: &Path) -> Result<Self> {
        for name in [DATABASE_CSV, STATEMENTS_CSV] {
            self.add_input_file(name, &root.join(name))?;
        }
        Ok(self)
    }

    pub fn add_input(&mut self, name: &str, fingerprint: impl Into<String>) {
        self.inputs.insert(name.to_string(), fingerprint.into());
    }

    pub fn add_input_file(&mut self, name: &str, path: &Path) -> Result<()> {
        let bytes = std::fs::read(path).with_context(|| format!("fingerprinting {}", path.display()))?;
        self.add_input(name, sha256_hex(&bytes));
        Ok(())
    }

    pub fn note(&mut self, key: &str, value: impl Into<String>) {
        self.notes.insert(key.to_string(), value.into());
    }

    /// Hashes the listed outputs (relative to `dir`) and writes
    /// `<dir>/provenance_<command>.json`.
    pub fn write(mut self, dir: &Path, outputs: &[&str]) -> Result<()> {
        for name in outputs {
            let path = dir.join(name);
            let bytes = std::fs::read(&path).with_context(|| format!("fingerprinting {}", path.display()))?;
            self.outputs.insert(name.to_string(), sha256_hex(&bytes));
        }
        let path = dir.join(format!("provenance_{}.json", self.command));
        std::fs::write(&path, serde_json::to_string_pretty(&self)?).with_context(|| format!("writing {}", path.display()))
    }
}
