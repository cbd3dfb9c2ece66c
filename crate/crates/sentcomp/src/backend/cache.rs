//! Append-only replay cache of completions keyed by a digest of (model, decoding params, prompt).

use std::collections::HashMap;
use std::fs::{File, OpenOptions};
use std::io::{Read, Write};
use std::path::{Path, PathBuf};
use std::sync::Mutex;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{Backend, BackendError, Completion, CompletionRequest, DecodingParams};
use crate::error::{Error, Result};

/// Hex SHA-256 over length-prefixed fields, so no two distinct field tuples share an encoding.
pub fn cache_key(params: &DecodingParams, prompt: &str) -> String {
    let mut hasher = Sha256::new();
    for field in [params.model_id.as_bytes(), &params.temperature.to_bits().to_le_bytes()[..]] {
        hasher.update((field.len() as u64).to_le_bytes());
        hasher.update(field);
    }
    hasher.update(8u64.to_le_bytes());
    hasher.update(u64::from(params.max_new_tokens).to_le_bytes());
    hasher.update((prompt.len() as u64).to_le_bytes());
    hasher.update(prompt.as_bytes());
    hex(&hasher.finalize())
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

/// Lowercase hex SHA-256.
pub fn hex_digest(bytes: &[u8]) -> String {
    hex(&Sha256::digest(bytes))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CacheEntry {
    pub key: String,
    pub model_id: String,
    pub prompt: String,
    pub params: DecodingParams,
    pub completion: String,
    /// Seconds since the Unix epoch at insertion.
    pub timestamp: u64,
}

#[derive(Debug)]
pub struct ReplayCache {
    path: PathBuf,
    entries: Mutex<HashMap<String, String>>,
    file: Mutex<File>,
}

impl ReplayCache {
    /// Opens or creates the cache file. A torn last line, as left by an interrupted write,
    /// is dropped with a warning; malformed lines elsewhere are errors.
    pub fn open(path: &Path) -> Result<Self> {
        let mut file = OpenOptions::new()
            .read(true)
            .append(true)
            .create(true)
            .open(path)
            .map_err(|e| Error::io(path, e))?;
        let mut text = String::new();
        file.read_to_string(&mut text).map_err(|e| Error::io(path, e))?;
        let mut entries = HashMap::new();
        let mut torn = false;
        let lines: Vec<&str> = text.lines().collect();
        for (i, line) in lines.iter().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            match serde_json::from_str::<CacheEntry>(line) {
                Ok(entry) => {
                    entries.insert(entry.key, entry.completion);
                }
                Err(e) if i + 1 == lines.len() && !text.ends_with('\n') => {
                    log::warn!("{}:{}: dropping incomplete cache line ({e})", path.display(), i + 1);
                    torn = true;
                }
                Err(e) => {
                    return Err(Error::Parse { path: path.to_owned(), line: i + 1, message: e.to_string() });
                }
            }
        }
        if torn {
            // Drop the unterminated tail so the next append starts on a fresh line.
            let keep = text.rfind('\n').map_or(0, |i| i + 1);
            file.set_len(keep as u64).map_err(|e| Error::io(path, e))?;
        } else if !text.is_empty() && !text.ends_with('\n') {
            file.write_all(b"\n").map_err(|e| Error::io(path, e))?;
        }
        log::debug!("{}: {} cached completion(s)", path.display(), entries.len());
        Ok(Self { path: path.to_owned(), entries: Mutex::new(entries), file: Mutex::new(file) })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn len(&self) -> usize {
        self.entries.lock().expect("cache lock").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn get(&self, key: &str) -> Option<String> {
        self.entries.lock().expect("cache lock").get(key).cloned()
    }

    /// Appends and flushes one entry before making it visible to lookups.
    pub fn insert(&self, params: &DecodingParams, prompt: &str, completion: &str) -> Result<String, BackendError> {
        let key = cache_key(params, prompt);
        let timestamp = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
        let entry = CacheEntry {
            key: key.clone(),
            model_id: params.model_id.clone(),
            prompt: prompt.to_owned(),
            params: params.clone(),
            completion: completion.to_owned(),
            timestamp,
        };
        let mut line = serde_json::to_string(&entry).expect("serializable");
        line.push('\n');
        {
            let mut file = self.file.lock().expect("cache lock");
            file.write_all(line.as_bytes())
                .and_then(|_| file.flush())
                .map_err(|e| BackendError::Io(format!("{}: {e}", self.path.display())))?;
        }
        self.entries.lock().expect("cache lock").insert(key.clone(), completion.to_owned());
        Ok(key)
    }
}

/// Serves cached completions and records live ones.
///
/// With no inner backend, or in strict mode, an uncached prompt is a [`BackendError::CacheMiss`].
/// Cache hits report zero latency, which keeps replayed record files byte-stable.
pub struct CachedBackend {
    id: String,
    cache: ReplayCache,
    inner: Option<Box<dyn Backend>>,
    strict: bool,
}

impl CachedBackend {
    pub fn new(id: impl Into<String>, cache: ReplayCache, inner: Option<Box<dyn Backend>>, strict: bool) -> Self {
        Self { id: id.into(), cache, inner, strict }
    }

    pub fn cache(&self) -> &ReplayCache {
        &self.cache
    }
}

impl Backend for CachedBackend {
    fn id(&self) -> String {
        self.id.clone()
    }

    fn complete(&self, request: CompletionRequest<'_>, params: &DecodingParams) -> Result<Completion, BackendError> {
        if request.prompt.is_empty() {
            return Err(BackendError::EmptyPrompt);
        }
        let key = cache_key(params, request.prompt);
        if let Some(text) = self.cache.get(&key) {
            return Ok(Completion { text, latency_ms: 0 });
        }
        let inner = match &self.inner {
            Some(inner) if !self.strict => inner,
            _ => return Err(BackendError::CacheMiss { key, example_id: request.example.id().to_owned() }),
        };
        let completion = inner.complete(request, params)?;
        self.cache.insert(params, request.prompt, &completion.text)?;
        Ok(completion)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backend::OracleBackend;
    use sentcomp_core::{CompressionExample, Origin};

    fn params() -> DecodingParams {
        DecodingParams { model_id: "m".into(), temperature: 0.0, max_new_tokens: 32 }
    }

    fn example() -> CompressionExample {
        CompressionExample::from_references("e1", "a b c", vec!["a c".into()], Origin::Custom).unwrap()
    }

    #[test]
    fn key_depends_on_every_field() {
        let base = cache_key(&params(), "prompt");
        assert_eq!(base.len(), 64);
        assert_eq!(base, cache_key(&params(), "prompt"));
        assert_ne!(base, cache_key(&params(), "prompt "));
        assert_ne!(base, cache_key(&DecodingParams { temperature: 0.5, ..params() }, "prompt"));
        assert_ne!(base, cache_key(&DecodingParams { max_new_tokens: 33, ..params() }, "prompt"));
        assert_ne!(base, cache_key(&DecodingParams { model_id: "n".into(), ..params() }, "prompt"));
        // Shifting bytes between fields must not collide.
        let a = DecodingParams { model_id: "ab".into(), ..params() };
        let b = DecodingParams { model_id: "a".into(), ..params() };
        assert_ne!(cache_key(&a, "c"), cache_key(&b, "bc"));
    }

    #[test]
    fn live_then_replay_then_strict_miss() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cache.jsonl");
        let ex = example();
        let req = CompletionRequest { example: &ex, prompt: "p1" };
        let live = CachedBackend::new("t", ReplayCache::open(&path).unwrap(), Some(Box::new(OracleBackend)), false);
        assert_eq!(live.complete(req, &params()).unwrap().text, "a c");
        drop(live);

        let replay = CachedBackend::new("t", ReplayCache::open(&path).unwrap(), None, true);
        assert_eq!(replay.cache().len(), 1);
        assert_eq!(replay.complete(req, &params()).unwrap(), Completion { text: "a c".into(), latency_ms: 0 });
        let miss = replay.complete(CompletionRequest { example: &ex, prompt: "p2" }, &params()).unwrap_err();
        let key = cache_key(&params(), "p2");
        assert_eq!(miss, BackendError::CacheMiss { key: key.clone(), example_id: "e1".into() });
        assert!(miss.to_string().contains(&key));
    }

    #[test]
    fn strict_mode_never_calls_inner() {
        let dir = tempfile::tempdir().unwrap();
        let cache = ReplayCache::open(&dir.path().join("c.jsonl")).unwrap();
        let backend = CachedBackend::new("t", cache, Some(Box::new(OracleBackend)), true);
        let ex = example();
        let err = backend.complete(CompletionRequest { example: &ex, prompt: "p" }, &params()).unwrap_err();
        assert!(matches!(err, BackendError::CacheMiss { .. }));
    }

    #[test]
    fn torn_last_line_is_dropped() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cache.jsonl");
        {
            let cache = ReplayCache::open(&path).unwrap();
            cache.insert(&params(), "p1", "x").unwrap();
        }
        let mut f = OpenOptions::new().append(true).open(&path).unwrap();
        f.write_all(b"{\"key\":\"tr").unwrap();
        drop(f);
        let cache = ReplayCache::open(&path).unwrap();
        assert_eq!(cache.len(), 1);
        cache.insert(&params(), "p2", "y").unwrap();
        drop(cache);
        let cache = ReplayCache::open(&path).unwrap();
        assert_eq!(cache.get(&cache_key(&params(), "p2")).as_deref(), Some("y"));
    }

    #[test]
    fn corrupt_middle_line_is_an_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cache.jsonl");
        std::fs::write(&path, "garbage\n\n").unwrap();
        assert!(matches!(ReplayCache::open(&path), Err(Error::Parse { line: 1, .. })));
    }
}
