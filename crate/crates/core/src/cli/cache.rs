//! On-disk result cache keyed by a configuration hash and the tool version.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResultCacheEntry {
    pub config_hash: String,
    pub tool_version: String,
    /// Seconds since the Unix epoch at write time.
    pub timestamp: u64,
    pub artifact: Value,
}

/// SHA-256 of the canonical JSON text of `config`.
pub fn config_hash<T: Serialize>(config: &T) -> Result<String> {
    let canonical = serde_json::to_value(config)?.to_string();
    Ok(hex::encode(Sha256::digest(canonical.as_bytes())))
}

#[derive(Clone, Debug)]
pub struct Cache {
    dir: PathBuf,
}

impl Cache {
    pub fn new(dir: impl Into<PathBuf>) -> Result<Self> {
        let dir = dir.into();
        fs::create_dir_all(&dir)?;
        Ok(Cache { dir })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    fn path(&self, hash: &str) -> PathBuf {
        self.dir.join(format!("{hash}-v{TOOL_VERSION}.json"))
    }

    /// Stored artifact for `hash` under the current tool version, if any.
    /// Unreadable or mismatched entries count as misses.
    pub fn get(&self, hash: &str) -> Option<Value> {
        let text = fs::read_to_string(self.path(hash)).ok()?;
        let entry: ResultCacheEntry = serde_json::from_str(&text).ok()?;
        (entry.config_hash == hash && entry.tool_version == TOOL_VERSION).then_some(entry.artifact)
    }

    /// Write through a temporary file in the cache directory, then rename,
    /// so readers never see a partial entry.
    pub fn put(&self, hash: &str, artifact: &Value) -> Result<()> {
        let entry = ResultCacheEntry {
            config_hash: hash.to_string(),
            tool_version: TOOL_VERSION.to_string(),
            timestamp: SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0),
            artifact: artifact.clone(),
        };
        let mut tmp = tempfile::NamedTempFile::new_in(&self.dir)?;
        tmp.write_all(serde_json::to_string_pretty(&entry)?.as_bytes())?;
        tmp.flush()?;
        tmp.persist(self.path(hash))
            .map_err(|e| Error::Io(e.error.to_string()))?;
        Ok(())
    }

    /// Cached artifact for `config`, computing and storing it on a miss.
    pub fn get_or_compute<C, F>(&self, config: &C, compute: F) -> Result<(Value, bool)>
    where
        C: Serialize,
        F: FnOnce() -> Result<Value>,
    {
        let hash = config_hash(config)?;
        if let Some(v) = self.get(&hash) {
            return Ok((v, true));
        }
        let v = compute()?;
        self.put(&hash, &v)?;
        Ok((v, false))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn round_trip_and_version_key() {
        let dir = tempfile::tempdir().unwrap();
        let cache = Cache::new(dir.path()).unwrap();
        let cfg = json!({"a": 1});
        let (v, hit) = cache.get_or_compute(&cfg, || Ok(json!({"x": 0.1}))).unwrap();
        assert!(!hit);
        let (w, hit) = cache.get_or_compute(&cfg, || panic!("should hit")).unwrap();
        assert!(hit);
        assert_eq!(v, w);
        let h = config_hash(&cfg).unwrap();
        assert_eq!(h.len(), 64);
        assert!(dir.path().join(format!("{h}-v{TOOL_VERSION}.json")).exists());
    }
}
