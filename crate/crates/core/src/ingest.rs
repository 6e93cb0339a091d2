//! Corpus loading and overlapping character-window chunking.
//!
//! Offsets and sizes are counted in Unicode scalar values.

use std::collections::HashSet;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path} is not valid UTF-8")]
    Utf8 { path: PathBuf },
    #[error("{path}:{line}: malformed JSONL record: {message}")]
    Jsonl {
        path: PathBuf,
        line: usize,
        message: String,
    },
    #[error("document {0:?} has empty text")]
    EmptyDocument(String),
    #[error("duplicate document id {0:?}")]
    DuplicateDocId(String),
    #[error("corpus contains no chunks")]
    EmptyCorpus,
    #[error("invalid chunk config: {0}")]
    BadConfig(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Document {
    pub doc_id: String,
    pub text: String,
    pub source_path: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Chunk {
    /// 1-based, corpus-wide; becomes the leaf node id.
    pub id: u32,
    pub doc_id: String,
    pub start: usize,
    pub end: usize,
    pub text: String,
}

pub const DEFAULT_SEPARATORS: [&str; 6] = ["\n\n", "\n", "。", "；", "，", ""];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChunkConfig {
    pub chunk_size: usize,
    pub chunk_overlap: usize,
    pub separators: Vec<String>,
}

impl Default for ChunkConfig {
    fn default() -> Self {
        Self {
            chunk_size: 200,
            chunk_overlap: 40,
            separators: DEFAULT_SEPARATORS.iter().map(|s| s.to_string()).collect(),
        }
    }
}

impl ChunkConfig {
    pub fn validate(&self) -> Result<(), IngestError> {
        if self.chunk_size == 0 {
            return Err(IngestError::BadConfig("chunk_size must be positive".into()));
        }
        if self.chunk_overlap >= self.chunk_size {
            return Err(IngestError::BadConfig(format!(
                "chunk_overlap {} must be smaller than chunk_size {}",
                self.chunk_overlap, self.chunk_size
            )));
        }
        Ok(())
    }
}

/// A chunk boundary before ids are assigned.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Span {
    pub start: usize,
    pub end: usize,
}

/// Splits `chars` into windows of at most `chunk_size` characters.
///
/// Each window ends right after the last occurrence of the highest-priority
/// separator that fits in the window, provided that boundary lies beyond
/// `start + chunk_overlap`; otherwise it is cut at exactly `chunk_size`
/// characters (the empty-separator fallback). The next window starts
/// `chunk_overlap` characters before the previous end.
pub fn split_spans(chars: &[char], cfg: &ChunkConfig) -> Vec<Span> {
    let len = chars.len();
    let mut spans = Vec::new();
    if len == 0 {
        return spans;
    }
    let seps: Vec<Vec<char>> = cfg
        .separators
        .iter()
        .filter(|s| !s.is_empty())
        .map(|s| s.chars().collect())
        .collect();
    let mut start = 0;
    loop {
        if len - start <= cfg.chunk_size {
            spans.push(Span { start, end: len });
            return spans;
        }
        let limit = start + cfg.chunk_size;
        let min_end = start + cfg.chunk_overlap + 1;
        let end = seps
            .iter()
            .find_map(|sep| last_boundary(chars, sep, min_end, limit))
            .unwrap_or(limit);
        spans.push(Span { start, end });
        start = end - cfg.chunk_overlap;
    }
}

/// Largest `e` in `[min_end, limit]` such that `chars[..e]` ends with `sep`.
fn last_boundary(chars: &[char], sep: &[char], min_end: usize, limit: usize) -> Option<usize> {
    let n = sep.len();
    (min_end.max(n)..=limit)
        .rev()
        .find(|&e| &chars[e - n..e] == sep)
}

/// Splits one document. Whitespace-only windows are dropped; ids are left 0
/// and assigned by [`assign_ids`].
pub fn split_text(doc: &Document, cfg: &ChunkConfig) -> Result<Vec<Chunk>, IngestError> {
    cfg.validate()?;
    if doc.text.is_empty() {
        return Err(IngestError::EmptyDocument(doc.doc_id.clone()));
    }
    let chars: Vec<char> = doc.text.chars().collect();
    Ok(split_spans(&chars, cfg)
        .into_iter()
        .filter_map(|span| {
            let text: String = chars[span.start..span.end].iter().collect();
            if text.trim().is_empty() {
                return None;
            }
            Some(Chunk {
                id: 0,
                doc_id: doc.doc_id.clone(),
                start: span.start,
                end: span.end,
                text,
            })
        })
        .collect())
}

/// Numbers chunks 1..N in the given order.
pub fn assign_ids(chunks: &mut [Chunk]) {
    for (i, c) in chunks.iter_mut().enumerate() {
        c.id = i as u32 + 1;
    }
}

#[derive(Deserialize)]
struct JsonlDoc {
    doc_id: String,
    text: String,
}

fn read_utf8(path: &Path) -> Result<String, IngestError> {
    let bytes = fs::read(path).map_err(|source| IngestError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    String::from_utf8(bytes).map_err(|_| IngestError::Utf8 {
        path: path.to_path_buf(),
    })
}

/// Reads one corpus file. `.jsonl` files hold one `{"doc_id","text"}` object
/// per line; anything else is a single plain-text document named by its file
/// stem.
pub fn read_documents(path: &Path) -> Result<Vec<Document>, IngestError> {
    let content = read_utf8(path)?;
    let source_path = path.display().to_string();
    if path.extension().is_some_and(|e| e == "jsonl") {
        let mut docs = Vec::new();
        for (i, line) in content.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let rec: JsonlDoc = serde_json::from_str(line).map_err(|e| IngestError::Jsonl {
                path: path.to_path_buf(),
                line: i + 1,
                message: e.to_string(),
            })?;
            docs.push(Document {
                doc_id: rec.doc_id,
                text: rec.text,
                source_path: source_path.clone(),
            });
        }
        Ok(docs)
    } else {
        let doc_id = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| source_path.clone());
        Ok(vec![Document {
            doc_id,
            text: content,
            source_path,
        }])
    }
}

/// Loads documents in path order and chunks them with globally numbered ids.
pub fn load_corpus(
    paths: &[PathBuf],
    cfg: &ChunkConfig,
) -> Result<(Vec<Document>, Vec<Chunk>), IngestError> {
    cfg.validate()?;
    let mut docs = Vec::new();
    let mut seen = HashSet::new();
    for path in paths {
        for doc in read_documents(path)? {
            if !seen.insert(doc.doc_id.clone()) {
                return Err(IngestError::DuplicateDocId(doc.doc_id));
            }
            docs.push(doc);
        }
    }
    let per_doc = split_all(&docs, cfg)?;
    let mut chunks: Vec<Chunk> = per_doc.into_iter().flatten().collect();
    if chunks.is_empty() {
        return Err(IngestError::EmptyCorpus);
    }
    assign_ids(&mut chunks);
    Ok((docs, chunks))
}

#[cfg(feature = "parallel")]
fn split_all(docs: &[Document], cfg: &ChunkConfig) -> Result<Vec<Vec<Chunk>>, IngestError> {
    use rayon::prelude::*;
    docs.par_iter().map(|d| split_text(d, cfg)).collect()
}

#[cfg(not(feature = "parallel"))]
fn split_all(docs: &[Document], cfg: &ChunkConfig) -> Result<Vec<Vec<Chunk>>, IngestError> {
    docs.iter().map(|d| split_text(d, cfg)).collect()
}

/// Expands directories (one level, sorted by name) into their `.txt`, `.md`
/// and `.jsonl` files; plain file arguments are kept as given.
pub fn expand_inputs(inputs: &[PathBuf]) -> Result<Vec<PathBuf>, IngestError> {
    let mut out = Vec::new();
    for input in inputs {
        if input.is_dir() {
            let rd = fs::read_dir(input).map_err(|source| IngestError::Io {
                path: input.clone(),
                source,
            })?;
            let mut files: Vec<PathBuf> = rd
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|p| {
                    p.is_file()
                        && p.extension()
                            .is_some_and(|e| e == "txt" || e == "md" || e == "jsonl")
                })
                .collect();
            files.sort();
            out.extend(files);
        } else {
            out.push(input.clone());
        }
    }
    Ok(out)
}
