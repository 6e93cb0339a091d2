//! Content-addressed on-disk embedding cache.
//!
//! One file per entry, named by the SHA-256 of `(model_id, kind, text)`.
//! Entry layout (little-endian): `u32` model-id length, model-id bytes,
//! `u32` dim, then `dim` `f32` values.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use sha2::{Digest, Sha256};

use super::{embed_with, EmbedError, EmbedKind, EmbedderConfig, EmbeddingProvider, ProviderKind};
use crate::vectorspace::EmbeddingVector;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct CacheStats {
    pub hits: usize,
    pub misses: usize,
    /// Entries that existed but could not be used.
    pub corrupt: usize,
}

pub struct DiskCache {
    dir: PathBuf,
    write_lock: Mutex<()>,
}

impl DiskCache {
    pub fn open(dir: impl Into<PathBuf>) -> Result<Self, EmbedError> {
        let dir = dir.into();
        fs::create_dir_all(&dir)?;
        Ok(Self {
            dir,
            write_lock: Mutex::new(()),
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn key(model_id: &str, kind: EmbedKind, text: &str) -> String {
        let mut h = Sha256::new();
        for part in [model_id, kind.as_str(), text] {
            h.update((part.len() as u64).to_le_bytes());
            h.update(part.as_bytes());
        }
        hex::encode(h.finalize())
    }

    pub fn entry_path(&self, key: &str) -> PathBuf {
        self.dir.join(&key[..2]).join(key)
    }

    /// `Ok(None)` on a miss; `Err(reason)` when an entry exists but is unusable.
    pub fn get(&self, key: &str, model_id: &str, dim: usize) -> Result<Option<Vec<f32>>, String> {
        let bytes = match fs::read(self.entry_path(key)) {
            Ok(b) => b,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(None),
            Err(e) => return Err(e.to_string()),
        };
        let (stored_model, values) = decode_entry(&bytes).ok_or("truncated entry")?;
        if stored_model != model_id {
            return Err(format!("entry belongs to model {stored_model:?}"));
        }
        if values.len() != dim {
            return Err(format!("stored dim {} != {dim}", values.len()));
        }
        Ok(Some(values))
    }

    /// Writes through a temporary file and rename so readers never see a
    /// partial entry.
    pub fn put(&self, key: &str, model_id: &str, values: &[f32]) -> Result<(), EmbedError> {
        let _guard = self.write_lock.lock().unwrap_or_else(|e| e.into_inner());
        let path = self.entry_path(key);
        let parent = path.parent().expect("entry has a parent dir");
        fs::create_dir_all(parent)?;
        let tmp = parent.join(format!(".{key}.tmp"));
        let mut f = fs::File::create(&tmp)?;
        f.write_all(&encode_entry(model_id, values))?;
        f.sync_all()?;
        fs::rename(&tmp, &path)?;
        Ok(())
    }
}

fn encode_entry(model_id: &str, values: &[f32]) -> Vec<u8> {
    let mut out = Vec::with_capacity(8 + model_id.len() + 4 * values.len());
    out.extend_from_slice(&(model_id.len() as u32).to_le_bytes());
    out.extend_from_slice(model_id.as_bytes());
    out.extend_from_slice(&(values.len() as u32).to_le_bytes());
    for v in values {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

fn decode_entry(bytes: &[u8]) -> Option<(String, Vec<f32>)> {
    let read_u32 = |at: usize| -> Option<u32> {
        Some(u32::from_le_bytes(bytes.get(at..at + 4)?.try_into().ok()?))
    };
    let mlen = read_u32(0)? as usize;
    let model = std::str::from_utf8(bytes.get(4..4 + mlen)?)
        .ok()?
        .to_owned();
    let dim = read_u32(4 + mlen)? as usize;
    let body = bytes.get(8 + mlen..)?;
    if body.len() != dim * 4 {
        return None;
    }
    let values = body
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
        .collect();
    Some((model, values))
}

fn to_f32(v: &EmbeddingVector) -> Vec<f32> {
    v.as_slice().iter().map(|&x| x as f32).collect()
}

/// Model identity recorded in cache entries. For the test provider the seed
/// is part of it, since it changes every vector.
pub fn cache_model_id(cfg: &EmbedderConfig) -> String {
    match cfg.provider {
        ProviderKind::DeterministicTest => format!("{}#seed={}", cfg.model_id, cfg.seed),
        ProviderKind::RemoteApi => cfg.model_id.clone(),
    }
}

/// Cache key for one input: covers the prefixed text actually sent to the
/// provider, so changing a prefix never serves stale vectors.
pub fn cache_key(cfg: &EmbedderConfig, kind: EmbedKind, text: &str) -> String {
    DiskCache::key(
        &cache_model_id(cfg),
        kind,
        &format!("{}{text}", cfg.prefix(kind)),
    )
}

/// Serves cached vectors and embeds only the misses, preserving input order.
///
/// Every returned vector carries `f32` precision whether it was a hit or a
/// miss, so repeated runs are bit-identical.
pub fn cache_get_or_embed(
    provider: &dyn EmbeddingProvider,
    texts: &[String],
    kind: EmbedKind,
    cfg: &EmbedderConfig,
    cache: &DiskCache,
) -> Result<(Vec<EmbeddingVector>, CacheStats), EmbedError> {
    if texts.is_empty() {
        return Err(EmbedError::EmptyInput);
    }
    let mut stats = CacheStats::default();
    let model = cache_model_id(cfg);
    let keys: Vec<String> = texts.iter().map(|t| cache_key(cfg, kind, t)).collect();
    let mut out: Vec<Option<EmbeddingVector>> = vec![None; texts.len()];
    let mut missing = Vec::new();
    for (i, key) in keys.iter().enumerate() {
        match cache.get(key, &model, cfg.dim) {
            Ok(Some(values)) => match EmbeddingVector::from_f32(&values) {
                Ok(v) => {
                    stats.hits += 1;
                    out[i] = Some(v);
                }
                Err(e) => {
                    log::warn!("cache entry {key} unusable ({e}); re-embedding");
                    stats.corrupt += 1;
                    missing.push(i);
                }
            },
            Ok(None) => missing.push(i),
            Err(reason) => {
                log::warn!("cache entry {key} unusable ({reason}); re-embedding");
                stats.corrupt += 1;
                missing.push(i);
            }
        }
    }
    stats.misses = missing.len();
    if !missing.is_empty() {
        let miss_texts: Vec<String> = missing.iter().map(|&i| texts[i].clone()).collect();
        let fresh = embed_with(provider, &miss_texts, kind, cfg)?;
        for (&i, v) in missing.iter().zip(fresh) {
            let stored = to_f32(&v);
            cache.put(&keys[i], &model, &stored)?;
            out[i] = Some(
                EmbeddingVector::from_f32(&stored)
                    .map_err(|source| EmbedError::BadVector { index: i, source })?,
            );
        }
    }
    Ok((out.into_iter().map(|v| v.expect("filled")).collect(), stats))
}
