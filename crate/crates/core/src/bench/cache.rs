//! On-disk response cache: one JSON file per key, named by the key's hex digest.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::client::RequestParams;
use crate::error::{Error, Result};
use crate::hashing;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CachedResponse {
    pub model: String,
    pub prompt_id: String,
    pub text: String,
}

#[derive(Debug, Clone)]
pub struct ResponseCache {
    dir: PathBuf,
}

/// sha256 over `(model name, prompt text, request params)`.
pub fn cache_key(model: &str, prompt_text: &str, params: &RequestParams) -> String {
    let canonical = serde_json::to_vec(&serde_json::json!({
        "model": model,
        "prompt": prompt_text,
        "params": params,
    }))
    .expect("cache key parts serialize");
    hashing::sha256_hex(&canonical)
}

impl ResponseCache {
    pub fn open(dir: impl Into<PathBuf>) -> Result<Self> {
        let dir = dir.into();
        std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        Ok(Self { dir })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn path_for(&self, key: &str) -> PathBuf {
        self.dir.join(format!("{key}.json"))
    }

    /// `Ok(None)` on a miss; unreadable entries are treated as misses.
    pub fn get(&self, key: &str) -> Option<CachedResponse> {
        let bytes = std::fs::read(self.path_for(key)).ok()?;
        match serde_json::from_slice(&bytes) {
            Ok(r) => Some(r),
            Err(e) => {
                log::warn!("ignoring corrupt cache entry {key}: {e}");
                None
            }
        }
    }

    /// Writes through a temporary file and renames, so readers never see a
    /// partial entry.
    pub fn put(&self, key: &str, entry: &CachedResponse) -> Result<()> {
        let path = self.path_for(key);
        let tmp = self.dir.join(format!(".{key}.{}.tmp", std::process::id()));
        let bytes = serde_json::to_vec(entry)?;
        std::fs::write(&tmp, bytes).map_err(|e| Error::io(&tmp, e))?;
        std::fs::rename(&tmp, &path).map_err(|e| Error::io(&path, e))
    }
}
