//! Output staging. Files are assembled in memory and written only once the
//! whole command has succeeded, followed by a manifest that records what
//! produced them.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::{CliError, Result};

pub const MANIFEST_NAME: &str = "manifest.toml";

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

#[derive(Debug, Serialize)]
struct Manifest<'a> {
    command: &'a str,
    version: &'a str,
    /// SHA-256 of the configuration bytes, or of the canonical argument
    /// string for flag-driven commands.
    config_sha256: String,
    seed: Option<u64>,
    inputs: &'a BTreeMap<String, String>,
    outputs: BTreeMap<String, String>,
    #[serde(skip_serializing_if = "BTreeMap::is_empty")]
    summary: &'a BTreeMap<String, toml::Value>,
}

pub struct Staged {
    command: String,
    config_sha256: String,
    seed: Option<u64>,
    inputs: BTreeMap<String, String>,
    files: Vec<(String, Vec<u8>)>,
    summary: BTreeMap<String, toml::Value>,
}

impl Staged {
    pub fn new(command: impl Into<String>, config: &[u8], seed: Option<u64>) -> Self {
        Self {
            command: command.into(),
            config_sha256: sha256_hex(config),
            seed,
            inputs: BTreeMap::new(),
            files: Vec::new(),
            summary: BTreeMap::new(),
        }
    }

    pub fn input(&mut self, path: &Path, bytes: &[u8]) {
        self.inputs.insert(path.display().to_string(), sha256_hex(bytes));
    }

    pub fn file(&mut self, name: impl Into<String>, bytes: Vec<u8>) {
        self.files.push((name.into(), bytes));
    }

    pub fn summary(&mut self, key: &str, value: impl Into<toml::Value>) {
        self.summary.insert(key.to_string(), value.into());
    }

    /// Writes every staged file and the manifest into `dir`.
    pub fn commit(self, dir: &Path) -> Result<Vec<PathBuf>> {
        std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
        let mut written = Vec::new();
        let mut outputs = BTreeMap::new();
        for (name, bytes) in &self.files {
            let path = dir.join(name);
            std::fs::write(&path, bytes).map_err(|e| CliError::io(&path, e))?;
            outputs.insert(name.clone(), sha256_hex(bytes));
            written.push(path);
        }
        let manifest = Manifest {
            command: &self.command,
            version: env!("CARGO_PKG_VERSION"),
            config_sha256: self.config_sha256,
            seed: self.seed,
            inputs: &self.inputs,
            outputs,
            summary: &self.summary,
        };
        let text = toml::to_string(&manifest).expect("manifest is plain data");
        let path = dir.join(MANIFEST_NAME);
        std::fs::write(&path, text).map_err(|e| CliError::io(&path, e))?;
        written.push(path);
        Ok(written)
    }
}
