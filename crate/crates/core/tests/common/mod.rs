//! Independent reference implementations shared by the integration tests.
#![allow(dead_code)]

use hctree::cluster::Dendrogram;
use hctree::vectorspace::{cosine_distance_raw, EmbeddingVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Single linkage recomputed from scratch at every step: every cluster pair's
/// distance is the minimum over all member pairs. Ties go to the pair with the
/// lowest smaller node id, then the lowest larger id.
pub fn brute_force_merges(vectors: &[Vec<f64>]) -> Vec<(u32, u32, f64)> {
    let n = vectors.len();
    // (node id, member leaf indices)
    let mut clusters: Vec<(u32, Vec<usize>)> = (0..n).map(|i| (i as u32 + 1, vec![i])).collect();
    let mut out = Vec::new();
    let mut next_id = n as u32 + 1;
    while clusters.len() > 1 {
        let mut best: Option<(f64, u32, u32, usize, usize)> = None;
        for a in 0..clusters.len() {
            for b in a + 1..clusters.len() {
                let mut d = f64::INFINITY;
                for &i in &clusters[a].1 {
                    for &j in &clusters[b].1 {
                        d = d.min(cosine_distance_raw(&vectors[i], &vectors[j]));
                    }
                }
                let (ia, ib) = (clusters[a].0, clusters[b].0);
                let (lo, hi) = (ia.min(ib), ia.max(ib));
                let better = match best {
                    None => true,
                    Some((bd, blo, bhi, _, _)) => d < bd || (d == bd && (lo, hi) < (blo, bhi)),
                };
                if better {
                    best = Some((d, lo, hi, a, b));
                }
            }
        }
        let (d, lo, hi, a, b) = best.unwrap();
        out.push((lo, hi, d));
        let mut members = clusters[a].1.clone();
        members.extend(clusters[b].1.iter().copied());
        clusters.remove(b);
        clusters.remove(a);
        clusters.push((next_id, members));
        next_id += 1;
    }
    out
}

/// Exhaustive argmin over every node, first in breadth-first order on ties.
pub fn exhaustive_argmin(tree: &Dendrogram, q: &[f64]) -> (u32, f64) {
    let order = bfs_order(tree);
    let mut best = (0, f64::INFINITY);
    for id in order {
        let node = tree.node(id).unwrap();
        let d = cosine_distance_raw(q, &node.representative);
        if d < best.1 {
            best = (id, d);
        }
    }
    best
}

pub fn bfs_order(tree: &Dendrogram) -> Vec<u32> {
    let mut order = vec![tree.root_id()];
    let mut i = 0;
    while i < order.len() {
        if let Some((l, r)) = tree.node(order[i]).unwrap().children {
            order.push(l);
            order.push(r);
        }
        i += 1;
    }
    order
}

/// Member leaf indices (0-based) of a node, by walking children.
pub fn members(tree: &Dendrogram, id: u32) -> Vec<usize> {
    let node = tree.node(id).unwrap();
    match node.children {
        None => vec![id as usize - 1],
        Some((l, r)) => {
            let mut m = members(tree, l);
            m.extend(members(tree, r));
            m
        }
    }
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Gaussian-ish random vectors (sum of uniforms), never zero.
pub fn random_vectors(rng: &mut impl Rng, n: usize, dim: usize) -> Vec<Vec<f64>> {
    (0..n)
        .map(|_| loop {
            let v: Vec<f64> = (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
            if v.iter().map(|x| x * x).sum::<f64>() > 1e-6 {
                break v;
            }
        })
        .collect()
}

/// Small-integer vectors: many exact distance ties and duplicates.
pub fn grid_vectors(rng: &mut impl Rng, n: usize, dim: usize) -> Vec<Vec<f64>> {
    (0..n)
        .map(|_| loop {
            let v: Vec<f64> = (0..dim).map(|_| rng.gen_range(0..3) as f64).collect();
            if v.iter().any(|&x| x != 0.0) {
                break v;
            }
        })
        .collect()
}

pub fn to_f32_precision(vs: &[Vec<f64>]) -> Vec<Vec<f64>> {
    vs.iter()
        .map(|v| v.iter().map(|&x| f64::from(x as f32)).collect())
        .collect()
}

pub fn embedding(v: &[f64]) -> EmbeddingVector {
    EmbeddingVector::new(v.to_vec()).unwrap()
}

pub mod cli_fixture;
pub mod http_stub;
