use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::error::Result;

pub const MANIFEST_NAME: &str = "manifest.json";

/// One emitted file in a run manifest.
#[derive(Debug, Clone, PartialEq, Serialize, serde::Deserialize)]
pub struct OutputEntry {
    pub path: String,
    pub bytes: u64,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, serde::Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub config: Value,
    pub seeds: Vec<u64>,
    pub outputs: Vec<OutputEntry>,
}

impl RunManifest {
    pub fn load(dir: &Path) -> Result<Self> {
        Ok(serde_json::from_slice(&std::fs::read(dir.join(MANIFEST_NAME))?)?)
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Output directory that records every file it writes for the manifest.
pub struct OutputDir {
    root: PathBuf,
    entries: Vec<OutputEntry>,
}

impl OutputDir {
    pub fn create(root: &Path) -> Result<Self> {
        std::fs::create_dir_all(root)?;
        Ok(Self { root: root.to_path_buf(), entries: Vec::new() })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.root.join(name)
    }

    pub fn write(&mut self, name: &str, bytes: &[u8]) -> Result<()> {
        std::fs::write(self.root.join(name), bytes)?;
        self.entries.retain(|e| e.path != name);
        self.entries.push(OutputEntry { path: name.to_string(), bytes: bytes.len() as u64, sha256: sha256_hex(bytes) });
        Ok(())
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        let mut bytes = serde_json::to_vec_pretty(value)?;
        bytes.push(b'\n');
        self.write(name, &bytes)
    }

    /// Serialises `rows` as CSV with a header taken from the first row's fields.
    pub fn write_csv<T: Serialize>(&mut self, name: &str, rows: &[T]) -> Result<()> {
        let mut w = csv::Writer::from_writer(Vec::new());
        for r in rows {
            w.serialize(r)?;
        }
        let bytes = w.into_inner().map_err(|e| crate::error::CliError::Data(e.to_string()))?;
        self.write(name, &bytes)
    }

    /// CSV with an explicit header, for tables whose width is only known at run time.
    pub fn write_table(&mut self, name: &str, header: &[String], rows: &[Vec<String>]) -> Result<()> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(header)?;
        for r in rows {
            w.write_record(r)?;
        }
        let bytes = w.into_inner().map_err(|e| crate::error::CliError::Data(e.to_string()))?;
        self.write(name, &bytes)
    }

    /// Writes the manifest covering everything emitted so far.
    pub fn finish(self, command: &str, config: Value, seeds: Vec<u64>) -> Result<RunManifest> {
        let manifest = RunManifest {
            tool: "narlab".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            command: command.into(),
            config,
            seeds,
            outputs: self.entries,
        };
        let mut bytes = serde_json::to_vec_pretty(&json!(manifest))?;
        bytes.push(b'\n');
        std::fs::write(self.root.join(MANIFEST_NAME), bytes)?;
        Ok(manifest)
    }
}
