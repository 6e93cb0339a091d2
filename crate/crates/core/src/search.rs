//! Nearest-node search over a dendrogram and the flat top-k baseline.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cluster::{Dendrogram, DendrogramNode, NodeId};
use crate::vectorspace::{cosine_distance_from_parts, dot, squared_norm, EmbeddingVector};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SearchError {
    #[error("query has dimension {actual}, index has {expected}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("k = {k} must be between 1 and {n}")]
    BadK { k: usize, n: usize },
    #[error("refinement size must be at least 1")]
    BadRefine,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SearchOptions {
    /// Keep only the top-`m` chunks by inner product with the query.
    pub mips_refine: Option<usize>,
    /// Never answer with the root (the whole corpus) when any other node exists.
    pub exclude_root: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetrievedChunk {
    pub chunk_id: u32,
    /// Inner product with the query; present when the result was refined.
    pub score: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetrievalResult {
    pub best_node_id: NodeId,
    pub best_distance: f64,
    pub chunks: Vec<RetrievedChunk>,
    pub refined: bool,
}

impl RetrievalResult {
    pub fn chunk_ids(&self) -> Vec<u32> {
        self.chunks.iter().map(|c| c.chunk_id).collect()
    }
}

fn check_query(tree: &Dendrogram, q: &EmbeddingVector) -> Result<(), SearchError> {
    if q.dim() != tree.dim() {
        return Err(SearchError::DimensionMismatch {
            expected: tree.dim(),
            actual: q.dim(),
        });
    }
    Ok(())
}

/// Breadth-first walk from the root (left child first) keeping the node with
/// the strictly smallest cosine distance; on ties the earlier-visited node
/// stays. Every node is visited, so this is the global argmin.
pub fn bfs_search(tree: &Dendrogram, q: &EmbeddingVector) -> Result<(NodeId, f64), SearchError> {
    bfs_search_excluding(tree, q, None)
}

fn bfs_search_excluding(
    tree: &Dendrogram,
    q: &EmbeddingVector,
    skip: Option<NodeId>,
) -> Result<(NodeId, f64), SearchError> {
    check_query(tree, q)?;
    let q = q.as_slice();
    let q_sq = squared_norm(q);
    let scan = tree.scan_table();
    // Scanning in id order over contiguous memory and keeping the minimum of
    // (distance, breadth-first rank) picks exactly the node a breadth-first
    // walk with a strict `<` would keep.
    let mut best: (f64, u32, NodeId) = (f64::INFINITY, u32::MAX, tree.root_id());
    for (i, rep) in scan.reps.chunks_exact(tree.dim()).enumerate() {
        let id = i as NodeId + 1;
        if skip == Some(id) {
            continue;
        }
        let d = cosine_distance_from_parts(dot(q, rep), q_sq, scan.squared_norms[i]);
        let rank = scan.bfs_rank[i];
        if d < best.0 || (d == best.0 && rank < best.1) {
            best = (d, rank, id);
        }
    }
    Ok((best.2, best.0))
}

/// Nearest node's leaves, optionally cut down to the top-`m` by inner product.
pub fn retrieve(
    tree: &Dendrogram,
    q: &EmbeddingVector,
    opts: &SearchOptions,
) -> Result<RetrievalResult, SearchError> {
    if opts.mips_refine == Some(0) {
        return Err(SearchError::BadRefine);
    }
    let (mut best_id, mut best_distance) = bfs_search(tree, q)?;
    if opts.exclude_root && best_id == tree.root_id() && tree.len() > 1 {
        (best_id, best_distance) = bfs_search_excluding(tree, q, Some(tree.root_id()))?;
    }
    let leaves = leaf_nodes_under(tree, best_id);
    let (chunks, refined) = match opts.mips_refine {
        Some(m) if leaves.len() > m => {
            let mut scored: Vec<(u32, f64)> = leaves
                .iter()
                .map(|n| {
                    (
                        n.chunk_id.expect("leaf"),
                        dot(q.as_slice(), &n.representative),
                    )
                })
                .collect();
            rank_by_score(&mut scored);
            scored.truncate(m);
            let chunks = scored
                .into_iter()
                .map(|(chunk_id, s)| RetrievedChunk {
                    chunk_id,
                    score: Some(s),
                })
                .collect();
            (chunks, true)
        }
        _ => {
            let mut ids: Vec<u32> = leaves.iter().map(|n| n.chunk_id.expect("leaf")).collect();
            ids.sort_unstable();
            let chunks = ids
                .into_iter()
                .map(|chunk_id| RetrievedChunk {
                    chunk_id,
                    score: None,
                })
                .collect();
            (chunks, false)
        }
    };
    Ok(RetrievalResult {
        best_node_id: best_id,
        best_distance,
        chunks,
        refined,
    })
}

fn leaf_nodes_under(tree: &Dendrogram, id: NodeId) -> Vec<&DendrogramNode> {
    let mut out = Vec::new();
    let mut stack = vec![id];
    while let Some(cur) = stack.pop() {
        let node = &tree.nodes()[cur as usize - 1];
        match node.children {
            Some((l, r)) => {
                stack.push(r);
                stack.push(l);
            }
            None => out.push(node),
        }
    }
    out
}

/// Descending score, ascending chunk id on ties.
fn rank_by_score(scored: &mut [(u32, f64)]) {
    scored.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
}

/// Brute-force inner-product top-`k` over `(chunk_id, vector)` pairs.
pub fn topk_baseline<'a>(
    leaves: impl IntoIterator<Item = (u32, &'a [f64])>,
    q: &EmbeddingVector,
    k: usize,
) -> Result<Vec<(u32, f64)>, SearchError> {
    let mut scored = Vec::new();
    for (id, v) in leaves {
        if v.len() != q.dim() {
            return Err(SearchError::DimensionMismatch {
                expected: v.len(),
                actual: q.dim(),
            });
        }
        scored.push((id, dot(q.as_slice(), v)));
    }
    if k == 0 || k > scored.len() {
        return Err(SearchError::BadK { k, n: scored.len() });
    }
    rank_by_score(&mut scored);
    scored.truncate(k);
    Ok(scored)
}

/// [`topk_baseline`] over a tree's leaves.
pub fn topk_tree(
    tree: &Dendrogram,
    q: &EmbeddingVector,
    k: usize,
) -> Result<Vec<(u32, f64)>, SearchError> {
    check_query(tree, q)?;
    topk_baseline(
        tree.nodes()[..tree.n_leaves()]
            .iter()
            .map(|n| (n.chunk_id.expect("leaf"), n.representative.as_slice())),
        q,
        k,
    )
}
