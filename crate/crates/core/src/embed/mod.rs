//! Embedding providers, batching and the on-disk embedding cache.

mod cache;
mod hash;
mod remote;

use std::thread;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::vectorspace::{EmbeddingVector, VectorError};

pub use cache::{cache_get_or_embed, cache_key, cache_model_id, CacheStats, DiskCache};
pub use hash::{fnv1a64, hash_embed, text_key};
pub use remote::RemoteProvider;

#[derive(Debug, Error)]
pub enum EmbedError {
    #[error("embedding provider failed after {attempts} attempt(s): {message}")]
    Provider { attempts: u32, message: String },
    #[error("provider returned dimension {actual}, expected {expected}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("provider returned {actual} vectors for {expected} inputs")]
    CountMismatch { expected: usize, actual: usize },
    #[error("input {index}: {source}")]
    BadVector {
        index: usize,
        #[source]
        source: VectorError,
    },
    #[error("nothing to embed")]
    EmptyInput,
    #[error("input {0} is empty")]
    EmptyText(usize),
    #[error("invalid embedder config: {0}")]
    BadConfig(String),
    #[error("embedding cache: {0}")]
    Cache(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProviderKind {
    RemoteApi,
    DeterministicTest,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EmbedKind {
    Document,
    Query,
}

impl EmbedKind {
    pub fn as_str(self) -> &'static str {
        match self {
            EmbedKind::Document => "document",
            EmbedKind::Query => "query",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbedderConfig {
    pub provider: ProviderKind,
    pub model_id: String,
    pub endpoint_url: String,
    pub dim: usize,
    pub batch_size: usize,
    pub document_prefix: String,
    pub query_prefix: String,
    /// Seed of the deterministic provider.
    pub seed: u64,
    /// Name of the environment variable holding the API key.
    pub api_key_env: Option<String>,
    pub max_in_flight: usize,
    pub retries: u32,
    pub retry_backoff_ms: u64,
    pub timeout_ms: u64,
}

impl Default for EmbedderConfig {
    fn default() -> Self {
        Self {
            provider: ProviderKind::DeterministicTest,
            model_id: "hash-embed-v1".into(),
            endpoint_url: String::new(),
            dim: 64,
            batch_size: 32,
            document_prefix: String::new(),
            query_prefix: String::new(),
            seed: 0,
            api_key_env: None,
            max_in_flight: 4,
            retries: 3,
            retry_backoff_ms: 500,
            timeout_ms: 30_000,
        }
    }
}

impl EmbedderConfig {
    pub fn validate(&self) -> Result<(), EmbedError> {
        if self.batch_size == 0 {
            return Err(EmbedError::BadConfig("batch_size must be >= 1".into()));
        }
        if self.max_in_flight == 0 {
            return Err(EmbedError::BadConfig("max_in_flight must be >= 1".into()));
        }
        match self.provider {
            ProviderKind::DeterministicTest if self.dim < 2 => Err(EmbedError::BadConfig(
                "deterministic provider needs dim >= 2".into(),
            )),
            _ if self.dim == 0 => Err(EmbedError::BadConfig("dim must be >= 1".into())),
            _ => Ok(()),
        }
    }

    pub fn prefix(&self, kind: EmbedKind) -> &str {
        match kind {
            EmbedKind::Document => &self.document_prefix,
            EmbedKind::Query => &self.query_prefix,
        }
    }
}

/// Turns one batch of (already prefixed) texts into raw vectors, in order.
pub trait EmbeddingProvider: Send + Sync {
    fn embed(&self, inputs: &[String]) -> Result<Vec<Vec<f64>>, EmbedError>;
}

pub struct DeterministicProvider {
    pub dim: usize,
    pub seed: u64,
}

impl EmbeddingProvider for DeterministicProvider {
    fn embed(&self, inputs: &[String]) -> Result<Vec<Vec<f64>>, EmbedError> {
        Ok(inputs
            .iter()
            .map(|t| hash_embed(t, self.dim, self.seed).into_inner())
            .collect())
    }
}

pub fn provider_for(cfg: &EmbedderConfig) -> Result<Box<dyn EmbeddingProvider>, EmbedError> {
    cfg.validate()?;
    Ok(match cfg.provider {
        ProviderKind::DeterministicTest => Box::new(DeterministicProvider {
            dim: cfg.dim,
            seed: cfg.seed,
        }),
        ProviderKind::RemoteApi => Box::new(RemoteProvider::new(cfg)?),
    })
}

/// Embeds `texts` with the provider described by `cfg`.
pub fn embed_batch(
    texts: &[String],
    kind: EmbedKind,
    cfg: &EmbedderConfig,
) -> Result<Vec<EmbeddingVector>, EmbedError> {
    let provider = provider_for(cfg)?;
    embed_with(provider.as_ref(), texts, kind, cfg)
}

/// Prefixes, batches and validates; up to `cfg.max_in_flight` batches are
/// submitted concurrently. Output order always matches `texts`.
pub fn embed_with(
    provider: &dyn EmbeddingProvider,
    texts: &[String],
    kind: EmbedKind,
    cfg: &EmbedderConfig,
) -> Result<Vec<EmbeddingVector>, EmbedError> {
    cfg.validate()?;
    if texts.is_empty() {
        return Err(EmbedError::EmptyInput);
    }
    if let Some(i) = texts.iter().position(|t| t.is_empty()) {
        return Err(EmbedError::EmptyText(i));
    }
    let prefix = cfg.prefix(kind);
    let inputs: Vec<String> = texts.iter().map(|t| format!("{prefix}{t}")).collect();
    let batches: Vec<&[String]> = inputs.chunks(cfg.batch_size).collect();

    let mut raw: Vec<Vec<f64>> = Vec::with_capacity(texts.len());
    for wave in batches.chunks(cfg.max_in_flight) {
        let results: Vec<Result<Vec<Vec<f64>>, EmbedError>> = if wave.len() == 1 {
            vec![provider.embed(wave[0])]
        } else {
            thread::scope(|s| {
                let handles: Vec<_> = wave
                    .iter()
                    .map(|batch| s.spawn(move || provider.embed(batch)))
                    .collect();
                handles
                    .into_iter()
                    .map(|h| h.join().expect("embedding worker panicked"))
                    .collect()
            })
        };
        for (batch, result) in wave.iter().zip(results) {
            let vectors = result?;
            if vectors.len() != batch.len() {
                return Err(EmbedError::CountMismatch {
                    expected: batch.len(),
                    actual: vectors.len(),
                });
            }
            raw.extend(vectors);
        }
    }

    raw.into_iter()
        .enumerate()
        .map(|(index, v)| {
            if v.len() != cfg.dim {
                return Err(EmbedError::DimensionMismatch {
                    expected: cfg.dim,
                    actual: v.len(),
                });
            }
            EmbeddingVector::new(v).map_err(|source| EmbedError::BadVector { index, source })
        })
        .collect()
}
