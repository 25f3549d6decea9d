//! Hashing-trick vectors for small closed vocabularies such as part-of-speech
//! tags or dependency labels.
//!
//! A featurizer needs no file. Its dimension grows with the number of values
//! it must tell apart, and each key maps to a fixed pseudorandom unit vector,
//! so featurizer vectors can be concatenated with word vectors from a store.

use crate::error::{Error, Result};
use crate::hashing::{hash32, prvg};
use crate::vector::{f64_to_unit_f32, EmbeddingVector};

/// Byte placed between namespace and key before hashing.
pub const NAMESPACE_SEPARATOR: u8 = 0x1F;

/// `max(2, 2·⌈log₁₀ n⌉)`.
pub fn featurizer_dim(n: u64) -> Result<usize> {
    if n == 0 {
        return Err(Error::InvalidN(n));
    }
    // ⌈log₁₀ n⌉ is the number of powers of ten below n.
    let mut digits = 0usize;
    let mut p = 1u64;
    while p < n {
        digits += 1;
        p = match p.checked_mul(10) {
            Some(next) => next,
            None => break,
        };
    }
    Ok((2 * digits).max(2))
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct FeaturizerSpec {
    max_values: u64,
    namespace: String,
    dimension: usize,
}

impl FeaturizerSpec {
    pub fn new(max_values: u64, namespace: impl Into<String>) -> Result<Self> {
        Ok(Self {
            dimension: featurizer_dim(max_values)?,
            max_values,
            namespace: namespace.into(),
        })
    }

    pub fn max_values(&self) -> u64 {
        self.max_values
    }

    pub fn namespace(&self) -> &str {
        &self.namespace
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    /// Unit vector for `key`, fixed by namespace, key and dimension.
    pub fn query(&self, key: &str) -> Result<EmbeddingVector> {
        featurizer_query(key, self)
    }
}

pub fn featurizer_query(key: &str, spec: &FeaturizerSpec) -> Result<EmbeddingVector> {
    if key.is_empty() {
        return Err(Error::EmptyKey);
    }
    let mut seed_bytes = Vec::with_capacity(spec.namespace.len() + 1 + key.len());
    seed_bytes.extend_from_slice(spec.namespace.as_bytes());
    seed_bytes.push(NAMESPACE_SEPARATOR);
    seed_bytes.extend_from_slice(key.as_bytes());
    let raw = prvg(hash32(&seed_bytes), spec.dimension);
    // A vector of exact zeros has probability 2^-53d; fall through to the
    // error rather than inventing a direction.
    f64_to_unit_f32(&raw)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dimension_examples() {
        assert_eq!(featurizer_dim(100).unwrap(), 4);
        assert_eq!(featurizer_dim(10).unwrap(), 2);
        assert_eq!(featurizer_dim(1).unwrap(), 2);
        assert_eq!(featurizer_dim(11).unwrap(), 4);
        assert_eq!(featurizer_dim(101).unwrap(), 6);
        assert_eq!(featurizer_dim(u64::MAX).unwrap(), 40);
        assert!(matches!(featurizer_dim(0), Err(Error::InvalidN(0))));
    }

    #[test]
    fn dimension_matches_float_formula_and_is_monotone() {
        let mut prev = 0;
        for n in 1..=100_000u64 {
            let d = featurizer_dim(n).unwrap();
            let float = (2.0 * (n as f64).log10().ceil()).max(2.0) as usize;
            // log10 is exact at powers of ten, which is where rounding matters.
            assert_eq!(d, float, "n = {n}");
            assert!(d >= prev);
            prev = d;
        }
    }

    #[test]
    fn small_dimension_still_spreads_keys() {
        let spec = FeaturizerSpec::new(100, "POS").unwrap();
        let vs: Vec<EmbeddingVector> = (0..100).map(|i| spec.query(&format!("T{i}")).unwrap()).collect();
        let mut sum = 0.0;
        let mut pairs = 0;
        for i in 0..vs.len() {
            for j in i + 1..vs.len() {
                assert_ne!(vs[i], vs[j]);
                sum += crate::vector::cosine(&vs[i], &vs[j]).unwrap().abs() as f64;
                pairs += 1;
            }
        }
        let mean = sum / pairs as f64;
        assert!(mean < 0.9, "mean |cos| {mean}");
    }

    #[test]
    fn namespaces_separate() {
        let pos = FeaturizerSpec::new(100, "POS").unwrap();
        let dep = FeaturizerSpec::new(100, "Dep").unwrap();
        let a = pos.query("NN").unwrap();
        assert_eq!(a, pos.query("NN").unwrap());
        assert!(a.is_normalized());
        assert_eq!(a.dimension(), 4);
        let b = dep.query("NN").unwrap();
        assert!(crate::vector::cosine(&a, &b).unwrap() < 0.9999);
        assert!(matches!(pos.query(""), Err(Error::EmptyKey)));
    }
}
