//! A built index: tree, chunk texts and manifest together.

use std::path::Path;

use serde::Serialize;

use crate::cluster::{build_tree, BuildOptions, ClusterError, Dendrogram};
use crate::embed::EmbedderConfig;
use crate::ingest::{Chunk, ChunkConfig};
use crate::search::{retrieve, topk_tree, RetrievalResult, SearchError, SearchOptions};
use crate::store::{load_index, save_index, IndexManifest, StoreError};
use crate::vectorspace::EmbeddingVector;

#[derive(Debug, Clone)]
pub struct Index {
    pub tree: Dendrogram,
    pub chunks: Vec<Chunk>,
    pub manifest: IndexManifest,
}

/// A retrieved chunk with its text attached.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Hit<'a> {
    pub chunk_id: u32,
    pub doc_id: &'a str,
    pub score: Option<f64>,
    pub text: &'a str,
}

impl Index {
    /// Clusters `vectors` (one per chunk, in chunk-id order).
    pub fn build(
        chunks: Vec<Chunk>,
        vectors: &[EmbeddingVector],
        embedder: &EmbedderConfig,
        chunk_config: &ChunkConfig,
        opts: BuildOptions,
    ) -> Result<Self, ClusterError> {
        let ids: Vec<u32> = chunks.iter().map(|c| c.id).collect();
        let tree = build_tree(vectors, &ids, opts)?;
        let manifest = IndexManifest::new(&tree, embedder, chunk_config);
        Ok(Self {
            tree,
            chunks,
            manifest,
        })
    }

    pub fn save(&mut self, dir: &Path) -> Result<(), StoreError> {
        self.manifest = save_index(&self.tree, &self.chunks, &self.manifest, dir)?;
        Ok(())
    }

    pub fn load(dir: &Path) -> Result<Self, StoreError> {
        let (tree, chunks, manifest) = load_index(dir)?;
        Ok(Self {
            tree,
            chunks,
            manifest,
        })
    }

    /// Chunk ids are `1..=N`.
    pub fn chunk(&self, id: u32) -> Option<&Chunk> {
        self.chunks.get((id as usize).checked_sub(1)?)
    }

    pub fn retrieve(
        &self,
        q: &EmbeddingVector,
        opts: &SearchOptions,
    ) -> Result<RetrievalResult, SearchError> {
        retrieve(&self.tree, q, opts)
    }

    pub fn topk(&self, q: &EmbeddingVector, k: usize) -> Result<Vec<(u32, f64)>, SearchError> {
        topk_tree(&self.tree, q, k)
    }

    pub fn hits<'a>(
        &'a self,
        scored: impl IntoIterator<Item = (u32, Option<f64>)>,
    ) -> Vec<Hit<'a>> {
        scored
            .into_iter()
            .map(|(id, score)| {
                let c = self.chunk(id).expect("retrieved chunk exists");
                Hit {
                    chunk_id: id,
                    doc_id: &c.doc_id,
                    score,
                    text: &c.text,
                }
            })
            .collect()
    }
}
