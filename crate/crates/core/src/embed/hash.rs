//! Deterministic pseudo-embeddings used as the offline test provider.
//!
//! `(text, seed)` is hashed with 64-bit FNV-1a; the hash keys a SplitMix64
//! counter stream whose 53-bit uniforms feed Box-Muller. Only fixed-width
//! integer arithmetic is involved before the final `ln`/`cos`/`sin`.

use crate::vectorspace::{normalize_raw, EmbeddingVector};

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;
const GOLDEN_GAMMA: u64 = 0x9e37_79b9_7f4a_7c15;

pub fn fnv1a64(bytes: impl IntoIterator<Item = u8>, mut h: u64) -> u64 {
    for b in bytes {
        h ^= u64::from(b);
        h = h.wrapping_mul(FNV_PRIME);
    }
    h
}

/// Stable 64-bit key of `(text, seed)`: seed bytes (little-endian) then text bytes.
pub fn text_key(text: &str, seed: u64) -> u64 {
    let h = fnv1a64(seed.to_le_bytes(), FNV_OFFSET);
    fnv1a64(text.bytes(), h)
}

fn splitmix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Uniform in (0, 1] from the `counter`-th draw of the stream keyed by `key`.
fn uniform(key: u64, counter: u64) -> f64 {
    let bits = splitmix64(key.wrapping_add(counter.wrapping_add(1).wrapping_mul(GOLDEN_GAMMA)));
    ((bits >> 11) + 1) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Unit-length pseudo-random vector determined entirely by `(text, dim, seed)`.
///
/// # Panics
///
/// If `dim < 2`.
pub fn hash_embed(text: &str, dim: usize, seed: u64) -> EmbeddingVector {
    assert!(dim >= 2, "hash_embed needs dim >= 2");
    let key = text_key(text, seed);
    let mut values = Vec::with_capacity(dim + 1);
    let mut counter = 0;
    while values.len() < dim {
        let u1 = uniform(key, counter);
        let u2 = uniform(key, counter + 1);
        counter += 2;
        let r = (-2.0 * u1.ln()).sqrt();
        let theta = 2.0 * std::f64::consts::PI * u2;
        values.push(r * theta.cos());
        values.push(r * theta.sin());
    }
    values.truncate(dim);
    // A zero draw would need every u1 == 1 exactly; retry on the next seed if so.
    match normalize_raw(&values) {
        Ok(unit) => EmbeddingVector::new(unit).expect("finite unit vector"),
        Err(_) => hash_embed(text, dim, seed.wrapping_add(1)),
    }
}
