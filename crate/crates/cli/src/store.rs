//! Output directory with atomic writes and a content-hash manifest.
//!
//! `manifest.json` lists every artifact with its SHA-256 plus the config
//! hash and tool version, and nothing that varies between identical runs.
//! Wall-clock timings go to `timings.json`, which is not hashed.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{io_error, HarnessError, Result};

pub const MANIFEST: &str = "manifest.json";
pub const TIMINGS: &str = "timings.json";
pub const TOOL_VERSION: &str = concat!("xgen ", env!("CARGO_PKG_VERSION"));

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool_version: String,
    pub config_hash: String,
    /// Relative path to SHA-256.
    pub artifacts: BTreeMap<String, String>,
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let bytes = fs::read(path).map_err(|e| io_error(path, e))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

pub struct Store {
    root: PathBuf,
    config_hash: String,
}

impl Store {
    pub fn new(root: &Path, config_hash: &str) -> Result<Self> {
        fs::create_dir_all(root).map_err(|e| io_error(root, e))?;
        Ok(Self { root: root.to_path_buf(), config_hash: config_hash.to_string() })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn path(&self, rel: &str) -> PathBuf {
        self.root.join(rel)
    }

    /// Runs `write` against a temporary sibling of `rel`, then renames it
    /// into place and records its hash.
    pub fn write_with<E>(&self, rel: &str, write: impl FnOnce(&Path) -> std::result::Result<(), E>) -> Result<()>
    where
        HarnessError: From<E>,
    {
        let dest = self.path(rel);
        let dir = dest.parent().expect("artifact paths have a parent");
        fs::create_dir_all(dir).map_err(|e| io_error(dir, e))?;
        let name = dest.file_name().expect("artifact paths name a file").to_string_lossy();
        let tmp = dir.join(format!(".{name}.tmp"));
        if let Err(e) = write(&tmp) {
            let _ = fs::remove_file(&tmp);
            return Err(e.into());
        }
        fs::rename(&tmp, &dest).map_err(|e| io_error(&dest, e))?;
        self.record(rel)
    }

    pub fn write_bytes(&self, rel: &str, bytes: &[u8]) -> Result<()> {
        self.write_with(rel, |p| fs::write(p, bytes).map_err(|e| io_error(p, e)))
    }

    fn write_plain(&self, rel: &str, bytes: &[u8]) -> Result<()> {
        let dest = self.path(rel);
        let tmp = self.path(&format!(".{rel}.tmp"));
        fs::write(&tmp, bytes).map_err(|e| io_error(&tmp, e))?;
        fs::rename(&tmp, &dest).map_err(|e| io_error(&dest, e))
    }

    pub fn manifest(&self) -> Result<Option<Manifest>> {
        let p = self.path(MANIFEST);
        if !p.exists() {
            return Ok(None);
        }
        let text = fs::read_to_string(&p).map_err(|e| io_error(&p, e))?;
        serde_json::from_str(&text).map(Some).map_err(|e| io_error(&p, e))
    }

    fn save_manifest(&self, m: &Manifest) -> Result<()> {
        let text = serde_json::to_string_pretty(m).expect("manifest serializes");
        self.write_plain(MANIFEST, format!("{text}\n").as_bytes())
    }

    /// Starts an empty manifest for this config, dropping earlier entries.
    pub fn reset(&self) -> Result<()> {
        self.save_manifest(&Manifest {
            tool_version: TOOL_VERSION.into(),
            config_hash: self.config_hash.clone(),
            artifacts: BTreeMap::new(),
        })
    }

    fn current(&self) -> Result<Manifest> {
        match self.manifest()? {
            // Entries from another config cannot be trusted by this one.
            Some(m) if m.config_hash == self.config_hash => Ok(m),
            _ => Ok(Manifest {
                tool_version: TOOL_VERSION.into(),
                config_hash: self.config_hash.clone(),
                artifacts: BTreeMap::new(),
            }),
        }
    }

    fn record(&self, rel: &str) -> Result<()> {
        let mut m = self.current()?;
        m.artifacts.insert(rel.to_string(), sha256_file(&self.path(rel))?);
        self.save_manifest(&m)
    }

    /// Path of an upstream artifact produced by `stage`, after checking it
    /// exists, belongs to this config, and still has its recorded hash.
    pub fn require(&self, rel: &str, stage: &'static str) -> Result<PathBuf> {
        let p = self.path(rel);
        let missing = || HarnessError::MissingArtifact { path: rel.to_string(), stage };
        let stale = |detail: String| HarnessError::StaleArtifact { path: rel.to_string(), stage, detail };
        if !p.exists() {
            return Err(missing());
        }
        let m = self.manifest()?.ok_or_else(missing)?;
        if m.config_hash != self.config_hash {
            return Err(stale("produced under a different config".into()));
        }
        let recorded = m.artifacts.get(rel).ok_or_else(missing)?;
        if *recorded != sha256_file(&p)? {
            return Err(stale("content hash differs from the manifest".into()));
        }
        Ok(p)
    }

    /// Adds `seconds` for `stage` to `timings.json`.
    pub fn record_timing(&self, stage: &str, seconds: f64) -> Result<()> {
        let p = self.path(TIMINGS);
        let mut t: BTreeMap<String, f64> = match fs::read_to_string(&p) {
            Ok(text) => serde_json::from_str(&text).unwrap_or_default(),
            Err(_) => BTreeMap::new(),
        };
        t.insert(stage.to_string(), seconds);
        self.write_plain(TIMINGS, serde_json::to_string_pretty(&t).expect("timings serialize").as_bytes())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tampering_is_detected() {
        let dir = tempfile::tempdir().unwrap();
        let store = Store::new(dir.path(), "h").unwrap();
        store.reset().unwrap();
        store.write_bytes("data/a.txt", b"one").unwrap();
        assert!(store.require("data/a.txt", "gen-data").is_ok());
        fs::write(store.path("data/a.txt"), b"two").unwrap();
        assert!(matches!(store.require("data/a.txt", "gen-data"), Err(HarnessError::StaleArtifact { .. })));
        assert!(matches!(store.require("data/b.txt", "gen-data"), Err(HarnessError::MissingArtifact { .. })));
        let other = Store::new(dir.path(), "other").unwrap();
        store.write_bytes("data/a.txt", b"one").unwrap();
        assert!(matches!(other.require("data/a.txt", "gen-data"), Err(HarnessError::StaleArtifact { .. })));
    }
}
