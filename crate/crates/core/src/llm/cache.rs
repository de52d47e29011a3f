use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::RwLock;

use super::{ChatResponse, LlmError};

static TMP_COUNTER: AtomicU64 = AtomicU64::new(0);

/// Content-addressed response cache: in memory, optionally mirrored to
/// `<dir>/<key[..2]>/<key>.json`.
#[derive(Debug, Default)]
pub struct ResponseCache {
    dir: Option<PathBuf>,
    mem: RwLock<HashMap<String, ChatResponse>>,
}

impl ResponseCache {
    pub fn in_memory() -> Self {
        Self::default()
    }

    pub fn on_disk(dir: impl Into<PathBuf>) -> Self {
        ResponseCache {
            dir: Some(dir.into()),
            mem: RwLock::default(),
        }
    }

    pub fn dir(&self) -> Option<&Path> {
        self.dir.as_deref()
    }

    fn path_for(&self, key: &str) -> Option<PathBuf> {
        self.dir
            .as_ref()
            .map(|d| d.join(&key[..2.min(key.len())]).join(format!("{key}.json")))
    }

    pub fn get(&self, key: &str) -> Option<ChatResponse> {
        if let Some(hit) = self.mem.read().unwrap().get(key) {
            return Some(hit.clone());
        }
        let path = self.path_for(key)?;
        let bytes = fs::read(&path).ok()?;
        match serde_json::from_slice::<ChatResponse>(&bytes) {
            Ok(resp) => {
                self.mem.write().unwrap().insert(key.to_string(), resp.clone());
                Some(resp)
            }
            Err(e) => {
                log::warn!("ignoring corrupt cache entry {}: {e}", path.display());
                None
            }
        }
    }

    pub fn put(&self, key: &str, response: &ChatResponse) -> Result<(), LlmError> {
        let mut stored = response.clone();
        stored.from_cache = false;
        if let Some(path) = self.path_for(key) {
            write_atomic(&path, &serde_json::to_vec_pretty(&stored).expect("serializable"))
                .map_err(|e| LlmError::Cache(format!("{}: {e}", path.display())))?;
        }
        self.mem.write().unwrap().insert(key.to_string(), stored);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.mem.read().unwrap().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Writes to a sibling temp file, then renames over the target.
pub(crate) fn write_atomic(path: &Path, bytes: &[u8]) -> std::io::Result<()> {
    let parent = path.parent().unwrap_or_else(|| Path::new("."));
    fs::create_dir_all(parent)?;
    let tmp = parent.join(format!(
        ".{}.{}.{}.tmp",
        path.file_name().and_then(|n| n.to_str()).unwrap_or("cache"),
        std::process::id(),
        TMP_COUNTER.fetch_add(1, Ordering::Relaxed)
    ));
    fs::write(&tmp, bytes)?;
    fs::rename(&tmp, path).inspect_err(|_| {
        let _ = fs::remove_file(&tmp);
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn disk_entries_survive_a_new_cache() {
        let dir = tempfile::tempdir().unwrap();
        let key = "ab".repeat(32);
        let first = ResponseCache::on_disk(dir.path());
        first.put(&key, &ChatResponse::text("hello")).unwrap();

        let second = ResponseCache::on_disk(dir.path());
        assert_eq!(second.get(&key).unwrap().content, "hello");
        assert!(second.get("cd".repeat(32).as_str()).is_none());
        // no stray temp files
        let names: Vec<_> = fs::read_dir(dir.path().join("ab"))
            .unwrap()
            .map(|e| e.unwrap().file_name().into_string().unwrap())
            .collect();
        assert_eq!(names, vec![format!("{key}.json")]);
    }
}
