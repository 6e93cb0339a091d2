//! On-disk index: four files in one directory.
//!
//! * `manifest.json` - format version, dimensions, embedder fingerprint,
//!   chunking config and SHA-256 checksums of the other three files.
//! * `chunks.jsonl` - one `{"id","doc_id","start","end","text"}` per line.
//! * `linkage.jsonl` - one `{"left","right","distance","size"}` per merge.
//! * `vectors.bin` - `b"HCRT"`, then `u32` version, dim and count (`2N - 1`),
//!   then `count * dim` little-endian `f32` raw representatives in node-id
//!   order.
//!
//! Loading rebuilds the tree from the leaf vectors and the linkage, so every
//! structural invariant is re-checked and merge representatives are
//! recomputed; the stored merge representatives must agree with them.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::cluster::{ClusterError, Dendrogram, LinkageRow, RepresentativeRule};
use crate::embed::{EmbedderConfig, ProviderKind};
use crate::ingest::{Chunk, ChunkConfig};

pub const FORMAT_VERSION: u32 = 1;
pub const VECTORS_MAGIC: [u8; 4] = *b"HCRT";
pub const MANIFEST_FILE: &str = "manifest.json";
pub const CHUNKS_FILE: &str = "chunks.jsonl";
pub const LINKAGE_FILE: &str = "linkage.jsonl";
pub const VECTORS_FILE: &str = "vectors.bin";

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{file}: checksum mismatch")]
    ChecksumMismatch { file: String },
    #[error("unsupported format version {0} (expected {FORMAT_VERSION})")]
    FormatVersionUnsupported(u32),
    #[error("{file}: {message}")]
    Parse { file: String, message: String },
    #[error("index invariant violated: {0}")]
    InvariantViolation(String),
}

impl From<ClusterError> for StoreError {
    fn from(e: ClusterError) -> Self {
        StoreError::InvariantViolation(e.to_string())
    }
}

/// Everything needed to embed queries the same way the corpus was embedded.
/// API keys are never recorded.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbedderFingerprint {
    pub provider: ProviderKind,
    pub model_id: String,
    pub dim: usize,
    pub document_prefix: String,
    pub query_prefix: String,
    pub seed: u64,
}

impl From<&EmbedderConfig> for EmbedderFingerprint {
    fn from(c: &EmbedderConfig) -> Self {
        Self {
            provider: c.provider,
            model_id: c.model_id.clone(),
            dim: c.dim,
            document_prefix: c.document_prefix.clone(),
            query_prefix: c.query_prefix.clone(),
            seed: c.seed,
        }
    }
}

impl EmbedderFingerprint {
    /// `base` with the identity fields overwritten by this fingerprint.
    pub fn apply_to(&self, base: &EmbedderConfig) -> EmbedderConfig {
        EmbedderConfig {
            provider: self.provider,
            model_id: self.model_id.clone(),
            dim: self.dim,
            document_prefix: self.document_prefix.clone(),
            query_prefix: self.query_prefix.clone(),
            seed: self.seed,
            ..base.clone()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndexManifest {
    pub format_version: u32,
    pub dim: usize,
    pub n_leaves: usize,
    pub embedder: EmbedderFingerprint,
    pub chunk_config: ChunkConfig,
    pub representative: RepresentativeRule,
    /// File name -> lowercase hex SHA-256.
    pub checksums: BTreeMap<String, String>,
}

impl IndexManifest {
    pub fn new(tree: &Dendrogram, embedder: &EmbedderConfig, chunk_config: &ChunkConfig) -> Self {
        Self {
            format_version: FORMAT_VERSION,
            dim: tree.dim(),
            n_leaves: tree.n_leaves(),
            embedder: embedder.into(),
            chunk_config: chunk_config.clone(),
            representative: tree.representative_rule(),
            checksums: BTreeMap::new(),
        }
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> StoreError + '_ {
    move |source| StoreError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn jsonl<T: Serialize>(rows: impl IntoIterator<Item = T>) -> Vec<u8> {
    let mut out = Vec::new();
    for row in rows {
        serde_json::to_writer(&mut out, &row).expect("serializable row");
        out.push(b'\n');
    }
    out
}

pub fn encode_vectors(tree: &Dendrogram) -> Vec<u8> {
    let dim = tree.dim();
    let mut out = Vec::with_capacity(16 + tree.len() * dim * 4);
    out.extend_from_slice(&VECTORS_MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&(dim as u32).to_le_bytes());
    out.extend_from_slice(&(tree.len() as u32).to_le_bytes());
    for node in tree.nodes() {
        for &x in &node.representative {
            out.extend_from_slice(&(x as f32).to_le_bytes());
        }
    }
    out
}

/// Returns `(dim, rows)`.
pub fn decode_vectors(bytes: &[u8]) -> Result<(usize, Vec<Vec<f32>>), StoreError> {
    let bad = |message: String| StoreError::Parse {
        file: VECTORS_FILE.into(),
        message,
    };
    if bytes.len() < 16 {
        return Err(bad("truncated header".into()));
    }
    if bytes[..4] != VECTORS_MAGIC {
        return Err(bad("bad magic".into()));
    }
    let word = |i: usize| u32::from_le_bytes(bytes[i..i + 4].try_into().unwrap());
    let version = word(4);
    if version != FORMAT_VERSION {
        return Err(StoreError::FormatVersionUnsupported(version));
    }
    let (dim, count) = (word(8) as usize, word(12) as usize);
    let body = &bytes[16..];
    if dim == 0 || body.len() != dim * count * 4 {
        return Err(bad(format!(
            "expected {count} x {dim} floats, body has {} bytes",
            body.len()
        )));
    }
    let floats: Vec<f32> = body
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
        .collect();
    Ok((dim, floats.chunks_exact(dim).map(<[f32]>::to_vec).collect()))
}

/// Writes the index; the manifest goes last and records the checksums.
pub fn save_index(
    tree: &Dendrogram,
    chunks: &[Chunk],
    manifest: &IndexManifest,
    dir: &Path,
) -> Result<IndexManifest, StoreError> {
    if chunks.len() != tree.n_leaves() {
        return Err(StoreError::InvariantViolation(format!(
            "{} chunks for {} leaves",
            chunks.len(),
            tree.n_leaves()
        )));
    }
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let files = [
        (CHUNKS_FILE, jsonl(chunks)),
        (LINKAGE_FILE, jsonl(tree.linkage())),
        (VECTORS_FILE, encode_vectors(tree)),
    ];
    let mut manifest = manifest.clone();
    manifest.checksums.clear();
    for (name, bytes) in &files {
        let path = dir.join(name);
        fs::write(&path, bytes).map_err(io_err(&path))?;
        manifest
            .checksums
            .insert(name.to_string(), sha256_hex(bytes));
    }
    let path = dir.join(MANIFEST_FILE);
    let mut f = fs::File::create(&path).map_err(io_err(&path))?;
    serde_json::to_writer_pretty(&mut f, &manifest).expect("serializable manifest");
    f.write_all(b"\n").map_err(io_err(&path))?;
    Ok(manifest)
}

fn read_checked(dir: &Path, name: &str, manifest: &IndexManifest) -> Result<Vec<u8>, StoreError> {
    let path = dir.join(name);
    let bytes = fs::read(&path).map_err(io_err(&path))?;
    match manifest.checksums.get(name) {
        Some(expected) if *expected == sha256_hex(&bytes) => Ok(bytes),
        _ => Err(StoreError::ChecksumMismatch { file: name.into() }),
    }
}

fn parse_jsonl<T: for<'de> Deserialize<'de>>(
    file: &str,
    bytes: &[u8],
) -> Result<Vec<T>, StoreError> {
    let text = std::str::from_utf8(bytes).map_err(|e| StoreError::Parse {
        file: file.into(),
        message: e.to_string(),
    })?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| StoreError::Parse {
                file: file.into(),
                message: format!("line {}: {e}", i + 1),
            })
        })
        .collect()
}

/// Loads and fully validates an index directory.
pub fn load_index(dir: &Path) -> Result<(Dendrogram, Vec<Chunk>, IndexManifest), StoreError> {
    let path = dir.join(MANIFEST_FILE);
    let raw = fs::read(&path).map_err(io_err(&path))?;
    let manifest: IndexManifest = serde_json::from_slice(&raw).map_err(|e| StoreError::Parse {
        file: MANIFEST_FILE.into(),
        message: e.to_string(),
    })?;
    if manifest.format_version != FORMAT_VERSION {
        return Err(StoreError::FormatVersionUnsupported(
            manifest.format_version,
        ));
    }
    let n = manifest.n_leaves;
    if n == 0 {
        return Err(StoreError::InvariantViolation(
            "n_leaves must be >= 1".into(),
        ));
    }

    let chunks: Vec<Chunk> = parse_jsonl(CHUNKS_FILE, &read_checked(dir, CHUNKS_FILE, &manifest)?)?;
    let linkage: Vec<LinkageRow> =
        parse_jsonl(LINKAGE_FILE, &read_checked(dir, LINKAGE_FILE, &manifest)?)?;
    let (dim, rows) = decode_vectors(&read_checked(dir, VECTORS_FILE, &manifest)?)?;

    if chunks.len() != n {
        return Err(StoreError::InvariantViolation(format!(
            "{} chunks, manifest says {n}",
            chunks.len()
        )));
    }
    if let Some((i, c)) = chunks
        .iter()
        .enumerate()
        .find(|(i, c)| c.id as usize != i + 1)
    {
        return Err(StoreError::InvariantViolation(format!(
            "chunk on line {} has id {}",
            i + 1,
            c.id
        )));
    }
    if dim != manifest.dim {
        return Err(StoreError::InvariantViolation(format!(
            "vectors have dim {dim}, manifest says {}",
            manifest.dim
        )));
    }
    if rows.len() != 2 * n - 1 {
        return Err(StoreError::InvariantViolation(format!(
            "{} vectors for {n} leaves (expected {})",
            rows.len(),
            2 * n - 1
        )));
    }

    let leaves: Vec<Vec<f64>> = rows[..n]
        .iter()
        .map(|r| r.iter().map(|&x| f64::from(x)).collect())
        .collect();
    let ids: Vec<u32> = chunks.iter().map(|c| c.id).collect();
    let tree = Dendrogram::from_linkage(leaves, &ids, &linkage, manifest.representative)?;

    for (stored, node) in rows[n..].iter().zip(tree.merges()) {
        let agrees = stored.iter().zip(&node.representative).all(|(&s, &r)| {
            let s = f64::from(s);
            (s - r).abs() <= 1e-6 * (1.0 + r.abs())
        });
        if !agrees {
            return Err(StoreError::InvariantViolation(format!(
                "stored representative of node {} disagrees with its members",
                node.id
            )));
        }
    }
    Ok((tree, chunks, manifest))
}
