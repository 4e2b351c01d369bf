//! The run manifest: what was run, with which config, and what it wrote.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{CliError, CliResult};

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FileEntry {
    pub bytes: u64,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub config_hash: String,
    pub seed: u64,
    pub versions: BTreeMap<String, String>,
    /// Wall-clock seconds per phase.
    pub timings: BTreeMap<String, f64>,
    /// Output files relative to the run directory.
    pub files: BTreeMap<String, FileEntry>,
    pub updated_unix: u64,
}

impl RunManifest {
    pub fn path(dir: &Path) -> PathBuf {
        dir.join(MANIFEST_FILE)
    }

    pub fn load(dir: &Path) -> CliResult<Self> {
        let path = Self::path(dir);
        if !path.is_file() {
            return Err(CliError::Data(format!(
                "{} is not a run directory (no {MANIFEST_FILE})",
                dir.display()
            )));
        }
        let text = std::fs::read_to_string(&path).map_err(|e| CliError::io(&path, e))?;
        serde_json::from_str(&text).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
    }

    /// The directory's manifest when it was written under the same config,
    /// otherwise a fresh one.
    pub fn open(dir: &Path, config_hash: &str, seed: u64) -> Self {
        match Self::load(dir) {
            Ok(m) if m.config_hash == config_hash => m,
            Ok(_) => {
                log::warn!("{} was produced by another config; starting a new manifest", dir.display());
                Self::fresh(config_hash, seed)
            }
            Err(_) => Self::fresh(config_hash, seed),
        }
    }

    fn fresh(config_hash: &str, seed: u64) -> Self {
        let mut versions = BTreeMap::new();
        versions.insert("silofed".into(), env!("CARGO_PKG_VERSION").into());
        versions.insert("manifest".into(), "1".into());
        RunManifest {
            config_hash: config_hash.into(),
            seed,
            versions,
            timings: BTreeMap::new(),
            files: BTreeMap::new(),
            updated_unix: 0,
        }
    }

    pub fn record(&mut self, dir: &Path, name: &str) -> CliResult<()> {
        let path = dir.join(name);
        let bytes = std::fs::read(&path).map_err(|e| CliError::io(&path, e))?;
        self.files.insert(
            name.into(),
            FileEntry {
                bytes: bytes.len() as u64,
                sha256: hex::encode(Sha256::digest(&bytes)),
            },
        );
        Ok(())
    }

    pub fn has(&self, name: &str) -> bool {
        self.files.contains_key(name)
    }

    pub fn save(&mut self, dir: &Path) -> CliResult<()> {
        self.updated_unix = SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0);
        let path = Self::path(dir);
        let text = serde_json::to_string_pretty(self).expect("manifest serializes");
        std::fs::write(&path, text).map_err(|e| CliError::io(&path, e))
    }
}
