//! Persistent generation cache: one file per key under a cache directory,
//! named by the hex digest of `(config fingerprint, prompt)`. Writes are
//! atomic (write to a temp file, then rename), so concurrent puts of the
//! same key leave exactly one durable record.

use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};

use log::warn;

use super::{hex_digest, GenerationRecord};

static TEMP_COUNTER: AtomicU64 = AtomicU64::new(0);

#[derive(Debug, Clone)]
pub struct GenerationCache {
    dir: PathBuf,
}

impl GenerationCache {
    pub fn new(dir: impl AsRef<Path>) -> std::io::Result<Self> {
        let dir = dir.as_ref().to_path_buf();
        std::fs::create_dir_all(&dir)?;
        Ok(GenerationCache { dir })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    fn key_path(&self, prompt: &str, fingerprint: &str) -> PathBuf {
        let key = format!("{fingerprint}\n{prompt}");
        self.dir.join(hex_digest(key.as_bytes()))
    }

    /// Returns the stored record, or `None` on a miss. Unreadable entries
    /// are treated as misses and surfaced as warnings.
    pub fn get(&self, prompt: &str, fingerprint: &str) -> Option<GenerationRecord> {
        let path = self.key_path(prompt, fingerprint);
        let data = match std::fs::read_to_string(&path) {
            Ok(data) => data,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return None,
            Err(e) => {
                warn!("unreadable cache entry {}: {e}", path.display());
                return None;
            }
        };
        match serde_json::from_str(&data) {
            Ok(record) => Some(record),
            Err(e) => {
                warn!("corrupt cache entry {}: {e}", path.display());
                None
            }
        }
    }

    pub fn put(&self, record: &GenerationRecord) -> std::io::Result<()> {
        let path = self.key_path(&record.prompt, &record.config_fingerprint);
        let json = serde_json::to_string_pretty(record).expect("record serializes");
        let tmp = self.dir.join(format!(
            ".{}.{}.{}.tmp",
            path.file_name()
                .expect("digest file name")
                .to_string_lossy(),
            std::process::id(),
            TEMP_COUNTER.fetch_add(1, Ordering::Relaxed),
        ));
        std::fs::write(&tmp, json)?;
        std::fs::rename(&tmp, &path)?;
        Ok(())
    }
}
