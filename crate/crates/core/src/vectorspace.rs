//! Dense vectors and the cosine metric shared by every other module.
//!
//! All arithmetic is done in `f64`. Cosine distance is computed as
//! `1 - <v,w> / sqrt(|v|^2 |w|^2)` so that a vector compared with itself
//! yields exactly `0.0`, which matters for exact tie handling in the
//! clustering and search code.

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum VectorError {
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("zero-norm vector")]
    ZeroNorm,
    #[error("empty vector set")]
    EmptySet,
    #[error("vector has no components")]
    EmptyVector,
    #[error("non-finite component at index {0}")]
    NonFinite(usize),
}

/// A dense, finite, nonzero real vector.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingVector {
    values: Vec<f64>,
}

impl EmbeddingVector {
    /// Validates dimension, finiteness and norm.
    pub fn new(values: Vec<f64>) -> Result<Self, VectorError> {
        if values.is_empty() {
            return Err(VectorError::EmptyVector);
        }
        if let Some(i) = values.iter().position(|x| !x.is_finite()) {
            return Err(VectorError::NonFinite(i));
        }
        if squared_norm(&values) == 0.0 {
            return Err(VectorError::ZeroNorm);
        }
        Ok(Self { values })
    }

    pub fn from_f32(values: &[f32]) -> Result<Self, VectorError> {
        Self::new(values.iter().map(|&x| f64::from(x)).collect())
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.values
    }

    pub fn norm(&self) -> f64 {
        squared_norm(&self.values).sqrt()
    }

    /// Multiplies every component by `factor` (must be positive and finite).
    pub fn scaled(&self, factor: f64) -> Result<Self, VectorError> {
        Self::new(self.values.iter().map(|x| x * factor).collect())
    }

    /// Rounds every component through `f32`, the on-disk precision.
    pub fn to_f32_precision(&self) -> Result<Self, VectorError> {
        Self::new(self.values.iter().map(|&x| f64::from(x as f32)).collect())
    }
}

/// Dot product with four interleaved accumulators (lets the compiler
/// vectorize). The summation order is fixed, so every caller gets
/// bit-identical results for the same inputs.
#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len().min(b.len());
    let (a, b) = (&a[..n], &b[..n]);
    let mut acc = [0.0f64; 4];
    let (ac, bc) = (a.chunks_exact(4), b.chunks_exact(4));
    let tail: f64 = ac
        .remainder()
        .iter()
        .zip(bc.remainder())
        .map(|(x, y)| x * y)
        .sum();
    for (x, y) in ac.zip(bc) {
        for k in 0..4 {
            acc[k] += x[k] * y[k];
        }
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

#[inline]
pub fn squared_norm(a: &[f64]) -> f64 {
    dot(a, a)
}

/// Cosine distance from precomputed parts, clamped to `[0, 2]`.
#[inline]
pub fn cosine_distance_from_parts(dot: f64, sq_norm_a: f64, sq_norm_b: f64) -> f64 {
    let d = 1.0 - dot / (sq_norm_a * sq_norm_b).sqrt();
    d.clamp(0.0, 2.0)
}

fn check_dims(v: &EmbeddingVector, w: &EmbeddingVector) -> Result<(), VectorError> {
    if v.dim() != w.dim() {
        return Err(VectorError::DimensionMismatch {
            expected: v.dim(),
            actual: w.dim(),
        });
    }
    Ok(())
}

pub fn cosine_distance(v: &EmbeddingVector, w: &EmbeddingVector) -> Result<f64, VectorError> {
    check_dims(v, w)?;
    Ok(cosine_distance_raw(v.as_slice(), w.as_slice()))
}

/// Unchecked variant over slices; both must be nonzero and equally long.
#[inline]
pub fn cosine_distance_raw(v: &[f64], w: &[f64]) -> f64 {
    cosine_distance_from_parts(dot(v, w), squared_norm(v), squared_norm(w))
}

pub fn inner_product(v: &EmbeddingVector, w: &EmbeddingVector) -> Result<f64, VectorError> {
    check_dims(v, w)?;
    Ok(dot(v.as_slice(), w.as_slice()))
}

pub fn normalize(v: &EmbeddingVector) -> EmbeddingVector {
    let n = v.norm();
    EmbeddingVector {
        values: v.values.iter().map(|x| x / n).collect(),
    }
}

/// Normalizes a raw slice, failing on a zero vector.
pub fn normalize_raw(v: &[f64]) -> Result<Vec<f64>, VectorError> {
    let n = squared_norm(v).sqrt();
    if n == 0.0 || !n.is_finite() {
        return Err(VectorError::ZeroNorm);
    }
    Ok(v.iter().map(|x| x / n).collect())
}

/// Componentwise arithmetic mean.
pub fn mean_vector(vs: &[EmbeddingVector]) -> Result<EmbeddingVector, VectorError> {
    let first = vs.first().ok_or(VectorError::EmptySet)?;
    let mut sum = vec![0.0; first.dim()];
    for v in vs {
        check_dims(first, v)?;
        for (s, x) in sum.iter_mut().zip(v.as_slice()) {
            *s += x;
        }
    }
    let n = vs.len() as f64;
    sum.iter_mut().for_each(|s| *s /= n);
    if squared_norm(&sum) == 0.0 {
        return Err(VectorError::ZeroNorm);
    }
    Ok(EmbeddingVector { values: sum })
}
