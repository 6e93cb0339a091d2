//! Single-linkage agglomerative clustering under cosine distance.
//!
//! Node ids are 1-based: leaves take `1..=N` in input order and the `m`-th
//! merge creates node `N + m`, so the root of a tree with `N` leaves is
//! `2N - 1`.

mod engine;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::exec::Execution;
use crate::vectorspace::{
    cosine_distance, normalize_raw, squared_norm, EmbeddingVector, VectorError,
};

pub type NodeId = u32;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ClusterError {
    #[error("cannot build a tree from zero vectors")]
    EmptyCorpus,
    #[error("{vectors} vectors but {ids} chunk ids")]
    LengthMismatch { vectors: usize, ids: usize },
    #[error("vector {index}: dimension {actual}, expected {expected}")]
    DimensionMismatch {
        index: usize,
        expected: usize,
        actual: usize,
    },
    #[error("vector {0} has zero norm")]
    ZeroNorm(usize),
    #[error("representative of node {0} is the zero vector")]
    DegenerateMean(NodeId),
    #[error("unknown node {0}")]
    UnknownNode(NodeId),
    #[error("clusters are not disjoint")]
    NotDisjoint,
    #[error(transparent)]
    Vector(#[from] VectorError),
    #[error("invalid dendrogram: {0}")]
    InvariantViolation(String),
}

/// How a merge node's representative vector is formed.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RepresentativeRule {
    /// Mean of every member leaf vector.
    #[default]
    MemberMean,
    /// Mean of the two children's representatives.
    ChildrenMean,
}

/// One merge: `left < right` are the merged node ids.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinkageRow {
    pub left: NodeId,
    pub right: NodeId,
    pub distance: f64,
    pub size: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DendrogramNode {
    pub id: NodeId,
    pub children: Option<(NodeId, NodeId)>,
    pub parent: Option<NodeId>,
    /// Raw (unnormalized) representative.
    pub representative: Vec<f64>,
    /// Unit-length copy of `representative`.
    pub unit: Vec<f64>,
    pub squared_norm: f64,
    pub size: u32,
    pub merge_distance: f64,
    pub chunk_id: Option<u32>,
}

impl DendrogramNode {
    pub fn is_leaf(&self) -> bool {
        self.children.is_none()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BuildOptions {
    pub representative: RepresentativeRule,
    pub execution: Execution,
}

impl Default for BuildOptions {
    fn default() -> Self {
        Self {
            representative: RepresentativeRule::MemberMean,
            execution: Execution::default(),
        }
    }
}

/// Immutable clustering tree with `2N - 1` nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct Dendrogram {
    n_leaves: usize,
    dim: usize,
    rule: RepresentativeRule,
    nodes: Vec<DendrogramNode>,
    scan: ScanTable,
}

/// Node data laid out for a full scan: representatives back to back in id
/// order, their squared norms, and each node's position in breadth-first
/// order (root first, left child before right) for tie-breaking.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct ScanTable {
    pub(crate) reps: Vec<f64>,
    pub(crate) squared_norms: Vec<f64>,
    pub(crate) bfs_rank: Vec<u32>,
}

impl ScanTable {
    fn new(nodes: &[DendrogramNode], dim: usize) -> Self {
        let mut reps = Vec::with_capacity(nodes.len() * dim);
        for node in nodes {
            reps.extend_from_slice(&node.representative);
        }
        let mut bfs_rank = vec![0u32; nodes.len()];
        let mut queue = std::collections::VecDeque::from([nodes.len() as NodeId]);
        let mut rank = 0;
        while let Some(id) = queue.pop_front() {
            bfs_rank[id as usize - 1] = rank;
            rank += 1;
            if let Some((l, r)) = nodes[id as usize - 1].children {
                queue.push_back(l);
                queue.push_back(r);
            }
        }
        Self {
            reps,
            squared_norms: nodes.iter().map(|n| n.squared_norm).collect(),
            bfs_rank,
        }
    }
}

impl Dendrogram {
    pub fn n_leaves(&self) -> usize {
        self.n_leaves
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn representative_rule(&self) -> RepresentativeRule {
        self.rule
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn root_id(&self) -> NodeId {
        self.nodes.len() as NodeId
    }

    pub(crate) fn scan_table(&self) -> &ScanTable {
        &self.scan
    }

    pub fn nodes(&self) -> &[DendrogramNode] {
        &self.nodes
    }

    pub fn node(&self, id: NodeId) -> Result<&DendrogramNode, ClusterError> {
        if id == 0 {
            return Err(ClusterError::UnknownNode(id));
        }
        self.nodes
            .get(id as usize - 1)
            .ok_or(ClusterError::UnknownNode(id))
    }

    /// Merge nodes in merge order.
    pub fn merges(&self) -> impl Iterator<Item = &DendrogramNode> {
        self.nodes[self.n_leaves..].iter()
    }

    pub fn linkage(&self) -> Vec<LinkageRow> {
        self.merges()
            .map(|node| {
                let (left, right) = node.children.expect("merge node has children");
                LinkageRow {
                    left,
                    right,
                    distance: node.merge_distance,
                    size: node.size,
                }
            })
            .collect()
    }

    /// Leaf vectors in leaf-id order.
    pub fn leaf_vectors(&self) -> impl Iterator<Item = &[f64]> {
        self.nodes[..self.n_leaves]
            .iter()
            .map(|n| n.representative.as_slice())
    }

    /// Chunk ids of every leaf below `id`, ascending.
    pub fn leaves_under(&self, id: NodeId) -> Result<Vec<u32>, ClusterError> {
        let mut out = Vec::with_capacity(self.node(id)?.size as usize);
        let mut stack = vec![id];
        while let Some(cur) = stack.pop() {
            let node = &self.nodes[cur as usize - 1];
            match node.children {
                Some((l, r)) => {
                    stack.push(r);
                    stack.push(l);
                }
                None => out.push(node.chunk_id.expect("leaf carries a chunk id")),
            }
        }
        out.sort_unstable();
        Ok(out)
    }

    /// Edges on the longest root-to-leaf path.
    pub fn depth(&self) -> usize {
        let mut depth = vec![0usize; self.nodes.len()];
        let mut max = 0;
        // Parents always have larger ids than their children.
        for node in self.nodes.iter().rev() {
            let d = depth[node.id as usize - 1];
            max = max.max(d);
            if let Some((l, r)) = node.children {
                depth[l as usize - 1] = d + 1;
                depth[r as usize - 1] = d + 1;
            }
        }
        max
    }

    /// Rebuilds a tree from leaf vectors and a merge sequence, validating every
    /// structural invariant and recomputing representatives.
    pub fn from_linkage(
        leaf_vectors: Vec<Vec<f64>>,
        chunk_ids: &[u32],
        linkage: &[LinkageRow],
        rule: RepresentativeRule,
    ) -> Result<Self, ClusterError> {
        let n = check_inputs(&leaf_vectors, chunk_ids)?;
        if linkage.len() != n - 1 {
            return Err(ClusterError::InvariantViolation(format!(
                "{} merges for {n} leaves",
                linkage.len()
            )));
        }
        let dim = leaf_vectors[0].len();
        let total = 2 * n - 1;
        let mut nodes: Vec<DendrogramNode> = Vec::with_capacity(total);
        // Member sums for the member-mean rule.
        let mut sums: Vec<Vec<f64>> = Vec::with_capacity(total);
        for (i, v) in leaf_vectors.into_iter().enumerate() {
            let unit = normalize_raw(&v).map_err(|_| ClusterError::ZeroNorm(i))?;
            nodes.push(DendrogramNode {
                id: i as NodeId + 1,
                children: None,
                parent: None,
                squared_norm: squared_norm(&v),
                unit,
                representative: v.clone(),
                size: 1,
                merge_distance: 0.0,
                chunk_id: Some(chunk_ids[i]),
            });
            if rule == RepresentativeRule::MemberMean {
                sums.push(v);
            }
        }

        let mut prev = f64::NEG_INFINITY;
        for (m, row) in linkage.iter().enumerate() {
            let id = (n + m + 1) as NodeId;
            let bad =
                |msg: String| ClusterError::InvariantViolation(format!("merge {}: {msg}", m + 1));
            if !(row.left < row.right && row.right < id && row.left >= 1) {
                return Err(bad(format!(
                    "children ({}, {}) must satisfy 1 <= left < right < {id}",
                    row.left, row.right
                )));
            }
            if !(row.distance.is_finite() && (0.0..=2.0).contains(&row.distance)) {
                return Err(bad(format!("distance {} outside [0, 2]", row.distance)));
            }
            if row.distance < prev {
                return Err(bad(format!(
                    "distance {} decreases from {prev}",
                    row.distance
                )));
            }
            prev = row.distance;
            let (li, ri) = (row.left as usize - 1, row.right as usize - 1);
            for c in [li, ri] {
                if nodes[c].parent.is_some() {
                    return Err(bad(format!("node {} already has a parent", c + 1)));
                }
                nodes[c].parent = Some(id);
            }
            let size = nodes[li].size + nodes[ri].size;
            if size != row.size {
                return Err(bad(format!("size {} but children sum to {size}", row.size)));
            }
            let representative: Vec<f64> = match rule {
                RepresentativeRule::MemberMean => {
                    let sum: Vec<f64> =
                        sums[li].iter().zip(&sums[ri]).map(|(a, b)| a + b).collect();
                    let rep = sum.iter().map(|x| x / f64::from(size)).collect();
                    sums.push(sum);
                    rep
                }
                RepresentativeRule::ChildrenMean => nodes[li]
                    .representative
                    .iter()
                    .zip(&nodes[ri].representative)
                    .map(|(a, b)| (a + b) / 2.0)
                    .collect(),
            };
            let unit =
                normalize_raw(&representative).map_err(|_| ClusterError::DegenerateMean(id))?;
            nodes.push(DendrogramNode {
                id,
                children: Some((row.left, row.right)),
                parent: None,
                squared_norm: squared_norm(&representative),
                representative,
                unit,
                size,
                merge_distance: row.distance,
                chunk_id: None,
            });
        }
        let scan = ScanTable::new(&nodes, dim);
        Ok(Self {
            n_leaves: n,
            dim,
            rule,
            nodes,
            scan,
        })
    }
}

fn check_inputs(vectors: &[Vec<f64>], chunk_ids: &[u32]) -> Result<usize, ClusterError> {
    let n = vectors.len();
    if n == 0 {
        return Err(ClusterError::EmptyCorpus);
    }
    if chunk_ids.len() != n {
        return Err(ClusterError::LengthMismatch {
            vectors: n,
            ids: chunk_ids.len(),
        });
    }
    let dim = vectors[0].len();
    for (index, v) in vectors.iter().enumerate() {
        if v.len() != dim || dim == 0 {
            return Err(ClusterError::DimensionMismatch {
                index,
                expected: dim,
                actual: v.len(),
            });
        }
        if squared_norm(v) == 0.0 {
            return Err(ClusterError::ZeroNorm(index));
        }
        if v.iter().any(|x| !x.is_finite()) {
            return Err(ClusterError::Vector(VectorError::NonFinite(index)));
        }
    }
    Ok(n)
}

/// Computes the single-linkage merge sequence only.
pub fn merge_sequence(
    vectors: &[Vec<f64>],
    execution: Execution,
) -> Result<Vec<LinkageRow>, ClusterError> {
    check_inputs(vectors, &vec![0; vectors.len()])?;
    Ok(engine::single_linkage(vectors, execution))
}

/// Builds the tree: leaf `i` (1-based) carries `chunk_ids[i - 1]`.
///
/// Among equally distant cluster pairs, the pair with the lowest smaller node
/// id merges first, then the lowest larger id.
pub fn build_tree(
    vectors: &[EmbeddingVector],
    chunk_ids: &[u32],
    opts: BuildOptions,
) -> Result<Dendrogram, ClusterError> {
    let raw: Vec<Vec<f64>> = vectors.iter().map(|v| v.as_slice().to_vec()).collect();
    build_tree_raw(raw, chunk_ids, opts)
}

pub fn build_tree_raw(
    vectors: Vec<Vec<f64>>,
    chunk_ids: &[u32],
    opts: BuildOptions,
) -> Result<Dendrogram, ClusterError> {
    check_inputs(&vectors, chunk_ids)?;
    let linkage = engine::single_linkage(&vectors, opts.execution);
    Dendrogram::from_linkage(vectors, chunk_ids, &linkage, opts.representative)
}

/// Minimum cosine distance over all cross pairs.
pub fn single_linkage_distance(
    a: &[EmbeddingVector],
    b: &[EmbeddingVector],
) -> Result<f64, ClusterError> {
    if a.is_empty() || b.is_empty() {
        return Err(ClusterError::Vector(VectorError::EmptySet));
    }
    if a.iter().any(|x| b.contains(x)) {
        return Err(ClusterError::NotDisjoint);
    }
    let mut best = f64::INFINITY;
    for x in a {
        for y in b {
            best = best.min(cosine_distance(x, y)?);
        }
    }
    Ok(best)
}
