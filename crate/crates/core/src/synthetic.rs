//! Seeded synthetic embeddings for tests, benchmarks and demos.
//!
//! Nothing here is needed to use a store. The generators exist so that
//! benchmarks and property checks can run without multi-gigabyte downloads,
//! and every generator is a pure function of its arguments.

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::Result;
use crate::hashing::{hash32, prvg, SplitMix64};
use crate::ingest::ParsedRecord;
use crate::vector::EmbeddingVector;

fn gaussian(rng: &mut ChaCha8Rng, d: usize) -> Vec<f64> {
    (0..d).map(|_| rng.sample::<f64, _>(StandardNormal)).collect()
}

fn unit(v: &[f64]) -> Vec<f64> {
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.iter().map(|x| x / n).collect()
}

fn to_f32(v: &[f64]) -> Vec<f32> {
    v.iter().map(|&x| x as f32).collect()
}

/// `n` independent standard-Gaussian directions, normalized.
pub fn gaussian_unit_vectors(n: usize, d: usize, seed: u64) -> Vec<Vec<f32>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| to_f32(&unit(&gaussian(&mut rng, d)))).collect()
}

/// Gaussian clusters on the unit sphere, resembling the neighbourhood
/// structure of trained embeddings.
///
/// Points are `normalize(center + spread · g / ‖g‖)` with unit centers and
/// Gaussian `g`, so `spread` is the ratio of noise to signal.
#[derive(Debug, Clone)]
pub struct ClusteredVectors {
    dimension: usize,
    spread: f64,
    centers: Vec<Vec<f64>>,
    rng: ChaCha8Rng,
}

impl ClusteredVectors {
    pub fn new(dimension: usize, clusters: usize, spread: f64, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let centers = (0..clusters.max(1))
            .map(|_| unit(&gaussian(&mut rng, dimension)))
            .collect();
        Self {
            dimension,
            spread,
            centers,
            rng,
        }
    }

    /// Cluster count that keeps roughly `per_cluster` points in each.
    pub fn for_count(n: usize, dimension: usize, seed: u64) -> Self {
        Self::new(dimension, (n / 100).max(1), 0.8, seed)
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    /// A new point near a randomly chosen center.
    pub fn next_vector(&mut self) -> Vec<f32> {
        let c = self.rng.random_range(0..self.centers.len());
        let g = unit(&gaussian(&mut self.rng, self.dimension));
        let v: Vec<f64> = self.centers[c]
            .iter()
            .zip(&g)
            .map(|(a, b)| a + self.spread * b)
            .collect();
        to_f32(&unit(&v))
    }

    pub fn take_vectors(&mut self, n: usize) -> Vec<Vec<f32>> {
        (0..n).map(|_| self.next_vector()).collect()
    }
}

impl Iterator for ClusteredVectors {
    type Item = Vec<f32>;

    fn next(&mut self) -> Option<Vec<f32>> {
        Some(self.next_vector())
    }
}

/// Key used for the `i`-th synthetic vector: `w` plus zero-padded digits,
/// so numeric order equals byte order.
pub fn numbered_key(i: usize) -> String {
    format!("w{i:08}")
}

/// `n` clustered records keyed by [`numbered_key`], generated lazily.
pub fn synthetic_records(
    n: usize,
    dimension: usize,
    seed: u64,
) -> impl Iterator<Item = Result<ParsedRecord>> {
    let gen = ClusteredVectors::for_count(n, dimension, seed);
    gen.take(n).enumerate().map(|(i, v)| {
        Ok(ParsedRecord {
            key: numbered_key(i),
            vector: EmbeddingVector::new(v)?,
        })
    })
}

const ONSETS: &[&str] = &[
    "b", "c", "d", "f", "g", "h", "j", "k", "l", "m", "n", "p", "r", "s", "t", "v", "w", "z", "br",
    "cr", "dr", "fl", "gr", "pl", "pr", "sh", "st", "tr", "ch", "th", "sl", "sp",
];
const VOWELS: &[&str] = &["a", "e", "i", "o", "u", "ea", "ou", "ai"];
const CODAS: &[&str] = &["", "", "", "n", "r", "l", "m", "t", "s", "nd", "rk", "st", "ck"];
const SUFFIXES: &[&str] = &[
    "", "s", "ed", "ing", "er", "ers", "ly", "ness", "ment", "able", "ful", "less", "ist", "ism",
    "ize", "ous",
];

/// Suffixes that turn a vocabulary word into a plausible unseen word.
pub const PERTURBATION_SUFFIXES: &[&str] = &["ish", "esque", "ify", "let", "ward", "dom"];

/// A vocabulary of stem + suffix words whose vectors share a stem component,
/// so morphological variants are similar the way they are in trained
/// embeddings.
#[derive(Debug, Clone)]
pub struct EnglishLikeVocabulary {
    pub words: Vec<String>,
    pub vectors: Vec<Vec<f32>>,
    /// Index of each word's stem.
    pub stems: Vec<usize>,
}

impl EnglishLikeVocabulary {
    /// About `n` unique words of dimension `d`. Each vector is
    /// `normalize(stem + 0.4·suffix + 0.3·noise)` over unit Gaussian parts.
    pub fn generate(n: usize, d: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let suffix_vecs: Vec<Vec<f64>> = SUFFIXES.iter().map(|_| unit(&gaussian(&mut rng, d))).collect();
        let mut seen = std::collections::HashSet::new();
        let mut out = Self {
            words: Vec::with_capacity(n),
            vectors: Vec::with_capacity(n),
            stems: Vec::with_capacity(n),
        };
        let mut stem_index = 0;
        while out.words.len() < n {
            let syllables = rng.random_range(2..=3);
            let mut stem = String::new();
            for _ in 0..syllables {
                stem.push_str(ONSETS[rng.random_range(0..ONSETS.len())]);
                stem.push_str(VOWELS[rng.random_range(0..VOWELS.len())]);
                stem.push_str(CODAS[rng.random_range(0..CODAS.len())]);
            }
            let stem_vec = unit(&gaussian(&mut rng, d));
            let variants = rng.random_range(6..=12);
            let mut any = false;
            for _ in 0..variants {
                let s = rng.random_range(0..SUFFIXES.len());
                let word = format!("{stem}{}", SUFFIXES[s]);
                if out.words.len() >= n || !seen.insert(word.clone()) {
                    continue;
                }
                let noise = unit(&gaussian(&mut rng, d));
                let v: Vec<f64> = (0..d)
                    .map(|i| stem_vec[i] + 0.4 * suffix_vecs[s][i] + 0.3 * noise[i])
                    .collect();
                out.words.push(word);
                out.vectors.push(to_f32(&unit(&v)));
                out.stems.push(stem_index);
                any = true;
            }
            if any {
                stem_index += 1;
            }
        }
        out
    }

    pub fn records(&self) -> impl Iterator<Item = Result<ParsedRecord>> + '_ {
        self.words.iter().zip(&self.vectors).map(|(w, v)| {
            Ok(ParsedRecord {
                key: w.clone(),
                vector: EmbeddingVector::new(v.clone())?,
            })
        })
    }
}

/// `n` lowercase ASCII words of 3 to 12 letters. Uses only integer
/// arithmetic, so the list is identical on every platform.
pub fn random_words(n: usize, seed: u64) -> Vec<String> {
    const LETTERS: &[u8] = b"abcdefghijklmnopqrstuvwxyz";
    let mut rng = SplitMix64::new(seed);
    (0..n)
        .map(|_| {
            let len = 3 + rng.below(10);
            (0..len).map(|_| LETTERS[rng.below(26)] as char).collect()
        })
        .collect()
}

/// A vector derived from the key's hash by the pinned generator. Unlike the
/// Gaussian generators this involves no transcendental functions, so it is
/// bit-identical across platforms.
pub fn hashed_vector(key: &str, d: usize) -> Vec<f32> {
    prvg(hash32(key.as_bytes()), d).iter().map(|&x| x as f32).collect()
}

/// Swaps two adjacent characters, chosen by `pick` (taken modulo the number
/// of swappable positions). Words shorter than two characters are returned
/// unchanged.
pub fn transpose_adjacent(word: &str, pick: usize) -> String {
    let mut chars: Vec<char> = word.chars().collect();
    if chars.len() < 2 {
        return word.to_owned();
    }
    // Prefer positions whose characters differ so the word actually changes.
    let positions: Vec<usize> = (0..chars.len() - 1)
        .filter(|&i| chars[i] != chars[i + 1])
        .collect();
    if positions.is_empty() {
        return word.to_owned();
    }
    let i = positions[pick % positions.len()];
    chars.swap(i, i + 1);
    chars.into_iter().collect()
}
