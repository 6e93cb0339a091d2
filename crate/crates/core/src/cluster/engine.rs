//! O(N^2) single-linkage merge sequence under cosine distance.
//!
//! The fast path builds a minimum spanning tree with Prim's algorithm,
//! computing distances on the fly in O(N) memory. When every tree edge has a
//! distinct weight the merge sequence is fully determined by the sorted edges
//! (each merge level joins exactly one pair of clusters), so no tie-breaking
//! is involved. Otherwise the matrix engine below replays the merges with
//! explicit tie-breaking.
//!
//! After clusters `a` and `b` merge, the distance from the new cluster to any
//! other cluster `x` is `min(d(a,x), d(b,x))`. Each active row caches its
//! nearest partner under the global ordering key
//! `(distance, smaller node id, larger node id)` plus the number of partners
//! sitting at exactly that distance. A merged cluster always takes the
//! largest node id so far, so it can never win a tie against an existing
//! partner; a row only needs a rescan when its partner was merged away while
//! another partner was tied with it.
//!
//! The matrix is square and row-major. A merge rewrites only the surviving
//! slot's row, so the current distance of a pair lives in the row of the
//! member with the newer node id (either row while both are original
//! leaves). Per merge this reads and writes two contiguous rows instead of
//! striding down columns.

use super::LinkageRow;
use crate::exec::{for_each_indexed, Execution};
use crate::vectorspace::{cosine_distance_from_parts, dot, squared_norm};

/// Tile edge for the mirror pass.
const TILE: usize = 64;

pub(crate) struct DistanceMatrix {
    n: usize,
    data: Vec<f64>,
}

impl DistanceMatrix {
    #[inline]
    fn at(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.n + col]
    }

    fn row_mut(&mut self, row: usize) -> &mut [f64] {
        &mut self.data[row * self.n..(row + 1) * self.n]
    }

    /// Pairwise cosine distances of `vectors`: the upper triangle is computed
    /// row by row, then mirrored tile by tile.
    pub(crate) fn cosine(vectors: &[Vec<f64>], exec: Execution) -> Self {
        let n = vectors.len();
        let norms: Vec<f64> = vectors.iter().map(|v| squared_norm(v)).collect();
        let mut data = vec![0.0; n * n];
        let rows: Vec<&mut [f64]> = data.chunks_mut(n.max(1)).collect();
        for_each_indexed(exec, rows, |i, row| {
            let vi = &vectors[i];
            for j in i + 1..n {
                row[j] = cosine_distance_from_parts(dot(vi, &vectors[j]), norms[i], norms[j]);
            }
        });
        for i0 in (0..n).step_by(TILE) {
            let i1 = (i0 + TILE).min(n);
            let (before, block) = data.split_at_mut(i0 * n);
            for j0 in (0..i0).step_by(TILE) {
                for j in j0..j0 + TILE {
                    let src = &before[j * n..(j + 1) * n];
                    for i in i0..i1 {
                        block[(i - i0) * n + j] = src[i];
                    }
                }
            }
            for i in i0..i1 {
                for j in i0..i {
                    block[(i - i0) * n + j] = block[(j - i0) * n + i];
                }
            }
        }
        Self { n, data }
    }
}

#[derive(Clone, Copy)]
struct RowBest {
    dist: f64,
    partner: usize,
    ties: usize,
}

struct State {
    d: DistanceMatrix,
    n_leaves: u32,
    ids: Vec<u32>,
    active: Vec<usize>,
    best: Vec<RowBest>,
}

impl State {
    /// Current distance between slots `x` and `y`.
    #[inline]
    fn get(&self, x: usize, y: usize) -> f64 {
        let (ix, iy) = (self.ids[x], self.ids[y]);
        if iy > ix && iy > self.n_leaves {
            self.d.at(y, x)
        } else {
            self.d.at(x, y)
        }
    }

    #[inline]
    fn pair_key(&self, x: usize, y: usize) -> (u32, u32) {
        let (a, b) = (self.ids[x], self.ids[y]);
        if a < b {
            (a, b)
        } else {
            (b, a)
        }
    }

    fn rescan(&mut self, x: usize) {
        let mut best = RowBest {
            dist: f64::INFINITY,
            partner: usize::MAX,
            ties: 0,
        };
        let mut best_key = (u32::MAX, u32::MAX);
        for &y in &self.active {
            if y == x {
                continue;
            }
            let dist = self.get(x, y);
            if dist < best.dist {
                best = RowBest {
                    dist,
                    partner: y,
                    ties: 1,
                };
                best_key = self.pair_key(x, y);
            } else if dist == best.dist {
                best.ties += 1;
                let key = self.pair_key(x, y);
                if key < best_key {
                    best.partner = y;
                    best_key = key;
                }
            }
        }
        self.best[x] = best;
    }

    /// Active slot whose cached pair has the smallest global key.
    fn select(&self) -> usize {
        let mut winner = usize::MAX;
        let mut winner_key = (f64::INFINITY, u32::MAX, u32::MAX);
        for &x in &self.active {
            let b = self.best[x];
            let (lo, hi) = self.pair_key(x, b.partner);
            let key = (b.dist, lo, hi);
            if winner == usize::MAX
                || key.0 < winner_key.0
                || (key.0 == winner_key.0 && (key.1, key.2) < (winner_key.1, winner_key.2))
            {
                winner = x;
                winner_key = key;
            }
        }
        winner
    }
}

/// Merge sequence for `vectors` (leaf `i` has node id `i + 1`).
pub(crate) fn single_linkage(vectors: &[Vec<f64>], exec: Execution) -> Vec<LinkageRow> {
    if vectors.len() < 2 {
        return Vec::new();
    }
    match linkage_from_mst(vectors.len(), prim_mst(vectors, exec)) {
        Some(rows) => rows,
        None => matrix_linkage(vectors, exec),
    }
}

/// Edges `(u, v, distance)` of a minimum spanning tree, in insertion order.
fn prim_mst(vectors: &[Vec<f64>], exec: Execution) -> Vec<(usize, usize, f64)> {
    let n = vectors.len();
    let norms: Vec<f64> = vectors.iter().map(|v| squared_norm(v)).collect();
    // Vertices outside the tree, with their nearest tree vertex and distance.
    let mut rest: Vec<(usize, usize, f64)> = (1..n).map(|v| (v, 0, f64::INFINITY)).collect();
    let mut edges = Vec::with_capacity(n - 1);
    let mut u = 0;
    while !rest.is_empty() {
        let relax = |slice: &mut [(usize, usize, f64)]| {
            let mut best: Option<(f64, usize, usize)> = None;
            for (pos, e) in slice.iter_mut().enumerate() {
                let d = cosine_distance_from_parts(
                    dot(&vectors[u], &vectors[e.0]),
                    norms[u],
                    norms[e.0],
                );
                if d < e.2 {
                    e.1 = u;
                    e.2 = d;
                }
                if best.is_none_or(|b| (e.2, e.0) < (b.0, b.1)) {
                    best = Some((e.2, e.0, pos));
                }
            }
            best
        };
        let (_, _, pos) = min_over_chunks(exec, &mut rest, relax).expect("rest is non-empty");
        let (v, from, d) = rest.swap_remove(pos);
        edges.push((from, v, d));
        u = v;
    }
    edges
}

/// Relaxes `items` chunk by chunk and returns the smallest `(key, vertex,
/// position)` over all chunks.
fn min_over_chunks<T: Send>(
    exec: Execution,
    items: &mut [T],
    f: impl Fn(&mut [T]) -> Option<(f64, usize, usize)> + Sync + Send,
) -> Option<(f64, usize, usize)> {
    const CHUNK: usize = 512;
    let pick = |a: Option<(f64, usize, usize)>, b: Option<(f64, usize, usize)>| match (a, b) {
        (Some(x), Some(y)) => Some(if (y.0, y.1) < (x.0, x.1) { y } else { x }),
        (x, None) => x,
        (None, y) => y,
    };
    let offset =
        |i: usize, r: Option<(f64, usize, usize)>| r.map(|(k, v, p)| (k, v, p + i * CHUNK));
    #[cfg(feature = "parallel")]
    if exec.is_parallel() && items.len() > 2 * CHUNK {
        use rayon::prelude::*;
        return items
            .par_chunks_mut(CHUNK)
            .enumerate()
            .map(|(i, c)| offset(i, f(c)))
            .reduce(|| None, pick);
    }
    let _ = exec;
    items
        .chunks_mut(CHUNK)
        .enumerate()
        .map(|(i, c)| offset(i, f(c)))
        .fold(None, pick)
}

/// Merge sequence from spanning-tree edges, or `None` when two edges share a
/// weight and the order of merges would depend on tie-breaking.
fn linkage_from_mst(n: usize, mut edges: Vec<(usize, usize, f64)>) -> Option<Vec<LinkageRow>> {
    edges.sort_by(|a, b| a.2.total_cmp(&b.2));
    if edges.windows(2).any(|w| w[0].2 == w[1].2) {
        return None;
    }
    let mut parent: Vec<usize> = (0..n).collect();
    let mut node_id: Vec<u32> = (1..=n as u32).collect();
    let mut size = vec![1u32; n];
    fn find(parent: &mut [usize], mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    let rows = edges
        .iter()
        .enumerate()
        .map(|(m, &(u, v, distance))| {
            let (ru, rv) = (find(&mut parent, u), find(&mut parent, v));
            let (a, b) = (node_id[ru], node_id[rv]);
            let row = LinkageRow {
                left: a.min(b),
                right: a.max(b),
                distance,
                size: size[ru] + size[rv],
            };
            parent[rv] = ru;
            size[ru] = row.size;
            node_id[ru] = (n + m + 1) as u32;
            row
        })
        .collect();
    Some(rows)
}

/// Merge sequence with explicit tie-breaking over a full distance matrix.
fn matrix_linkage(vectors: &[Vec<f64>], exec: Execution) -> Vec<LinkageRow> {
    let n = vectors.len();
    if n < 2 {
        return Vec::new();
    }
    let mut st = State {
        d: DistanceMatrix::cosine(vectors, exec),
        n_leaves: n as u32,
        ids: (1..=n as u32).collect(),
        active: (0..n).collect(),
        best: vec![
            RowBest {
                dist: f64::INFINITY,
                partner: usize::MAX,
                ties: 0,
            };
            n
        ],
    };
    for x in 0..n {
        st.rescan(x);
    }
    let mut sizes = vec![1u32; n];
    let mut rows = Vec::with_capacity(n - 1);
    let mut merged = Vec::with_capacity(n);
    let mut needs_rescan = Vec::new();

    for m in 1..n {
        let x = st.select();
        let y = st.best[x].partner;
        let dist = st.best[x].dist;
        let (keep, gone) = if st.ids[x] < st.ids[y] {
            (x, y)
        } else {
            (y, x)
        };
        rows.push(LinkageRow {
            left: st.ids[keep],
            right: st.ids[gone],
            distance: dist,
            size: sizes[keep] + sizes[gone],
        });
        st.active.retain(|&s| s != gone);
        sizes[keep] += sizes[gone];

        // Distances are read under the old ids, then `keep` takes the newest
        // id and its row becomes the one that holds every pair it is in.
        merged.clear();
        needs_rescan.clear();
        for &z in &st.active {
            if z == keep {
                continue;
            }
            let da = st.get(keep, z);
            let db = st.get(gone, z);
            let dz = da.min(db);
            merged.push((z, dz));

            let row = &mut st.best[z];
            if dz == row.dist {
                row.ties = row.ties + 1 - usize::from(da == row.dist) - usize::from(db == row.dist);
            }
            if row.partner == keep || row.partner == gone {
                row.partner = keep;
                if row.ties > 1 {
                    needs_rescan.push(z);
                }
            }
        }
        st.ids[keep] = (n + m) as u32;
        let row = st.d.row_mut(keep);
        for &(z, dz) in &merged {
            row[z] = dz;
        }
        for &z in &needs_rescan {
            st.rescan(z);
        }
        if st.active.len() > 1 {
            st.rescan(keep);
        }
    }
    rows
}
