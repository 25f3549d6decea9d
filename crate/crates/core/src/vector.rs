//! Dense `f32` vectors and the arithmetic shared by every other module.
//!
//! All reductions accumulate in `f64` in index order. Search results are
//! compared bit-for-bit against independent scans, so the summation order is
//! part of the contract: `dot = Σ aᵢbᵢ`, `cos = dot / (√Σaᵢ² · √Σbᵢ²)`.

use std::ops::Deref;

use crate::error::{Error, Result};

/// Norms below this are treated as zero.
pub const ZERO_NORM: f64 = 1e-12;

/// Tolerance on the Euclidean norm of a vector flagged as normalized.
pub const UNIT_TOLERANCE: f64 = 1e-5;

/// A fixed-dimension vector of finite `f32` components.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingVector(Vec<f32>);

impl EmbeddingVector {
    pub fn new(components: Vec<f32>) -> Result<Self> {
        if components.is_empty() {
            return Err(Error::EmptyVector);
        }
        if let Some(index) = components.iter().position(|c| !c.is_finite()) {
            return Err(Error::NonFinite { index });
        }
        Ok(Self(components))
    }

    /// Wraps components already known to be finite and non-empty.
    pub(crate) fn from_raw(components: Vec<f32>) -> Self {
        debug_assert!(!components.is_empty());
        Self(components)
    }

    pub fn dimension(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f32] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f32> {
        self.0
    }

    pub fn norm(&self) -> f64 {
        norm(&self.0)
    }

    pub fn is_normalized(&self) -> bool {
        (self.norm() - 1.0).abs() <= UNIT_TOLERANCE
    }
}

impl Deref for EmbeddingVector {
    type Target = [f32];

    fn deref(&self) -> &[f32] {
        &self.0
    }
}

impl TryFrom<Vec<f32>> for EmbeddingVector {
    type Error = Error;

    fn try_from(value: Vec<f32>) -> Result<Self> {
        Self::new(value)
    }
}

impl From<EmbeddingVector> for Vec<f32> {
    fn from(v: EmbeddingVector) -> Self {
        v.0
    }
}

pub fn norm(v: &[f32]) -> f64 {
    v.iter().map(|&c| (c as f64) * (c as f64)).sum::<f64>().sqrt()
}

pub fn dot(a: &[f32], b: &[f32]) -> f64 {
    a.iter().zip(b).map(|(&x, &y)| (x as f64) * (y as f64)).sum()
}

/// Returns `v / ‖v‖₂`.
pub fn normalize(v: &EmbeddingVector) -> Result<EmbeddingVector> {
    let n = v.norm();
    if n < ZERO_NORM {
        return Err(Error::ZeroVector);
    }
    Ok(EmbeddingVector(
        v.iter().map(|&c| ((c as f64) / n) as f32).collect(),
    ))
}

/// Normalizes in double precision without rounding to `f32`.
pub fn normalize_f64(v: &[f64]) -> Result<Vec<f64>> {
    let n = v.iter().map(|c| c * c).sum::<f64>().sqrt();
    if n.is_nan() || n < ZERO_NORM {
        return Err(Error::ZeroVector);
    }
    Ok(v.iter().map(|c| c / n).collect())
}

pub(crate) fn f64_to_unit_f32(v: &[f64]) -> Result<EmbeddingVector> {
    let unit = normalize_f64(v)?;
    Ok(EmbeddingVector(unit.into_iter().map(|c| c as f32).collect()))
}

/// Cosine similarity clamped to `[-1, 1]`.
pub fn cosine(u: &EmbeddingVector, v: &EmbeddingVector) -> Result<f32> {
    if u.dimension() != v.dimension() {
        return Err(Error::DimensionMismatch {
            expected: u.dimension(),
            actual: v.dimension(),
        });
    }
    Ok(cosine_slices(u, v))
}

/// Cosine of two equal-length slices. A zero vector has similarity 0 with
/// everything.
pub fn cosine_slices(a: &[f32], b: &[f32]) -> f32 {
    debug_assert_eq!(a.len(), b.len());
    let mut dot = 0.0f64;
    let mut na = 0.0f64;
    let mut nb = 0.0f64;
    for (&x, &y) in a.iter().zip(b) {
        let (x, y) = (x as f64, y as f64);
        dot += x * y;
        na += x * x;
        nb += y * y;
    }
    cosine_from_parts(dot, na, nb)
}

/// `dot / (√na · √nb)`, clamped and rounded to `f32`. Every similarity in
/// the crate goes through here so that scans and point lookups agree bit for
/// bit.
#[inline]
pub(crate) fn cosine_from_parts(dot: f64, na: f64, nb: f64) -> f32 {
    let denom = na.sqrt() * nb.sqrt();
    if denom == 0.0 {
        return 0.0;
    }
    let c = (dot / denom).clamp(-1.0, 1.0) as f32;
    // Fold -0.0 into 0.0 so ordering by total_cmp matches ordering by value.
    if c == 0.0 {
        0.0
    } else {
        c
    }
}
