//! Out-of-vocabulary vectors.
//!
//! A word that is not in the store still gets a deterministic unit vector:
//!
//! 1. Pad the word with `bow`/`eow` sentinels and take its unique character
//!    n-grams (lengths `ngram_min..=ngram_max`).
//! 2. Sum one pseudorandom vector per n-gram, seeded by the n-gram's
//!    xxHash32, and normalize. This is the *base* vector; words that share
//!    spelling share n-grams and therefore direction.
//! 3. On stores with an n-gram index, find the `match_k` most string-similar
//!    keys, average their vectors, and blend: `normalize(α·base + β·match)`
//!    with α = 0.3, β = 0.7.

use std::collections::{BTreeMap, HashMap};

use crate::error::{Error, Result};
use crate::format::{Ordinal, StoreReader};
use crate::hashing::{hash32, prvg, prvg_accumulate};
use crate::meta::{StoreMetadata, DEFAULT_NGRAM_MAX, DEFAULT_NGRAM_MIN};
use crate::vector::{normalize_f64, EmbeddingVector};

pub const BOW: char = '\u{1}';
pub const EOW: char = '\u{2}';

/// Weight of an n-gram starting in the second half of its word.
const SUFFIX_WEIGHT: f64 = 0.4;
const LENGTH_WEIGHT: f64 = 0.3;
const EDGE_BONUS: f64 = 0.05;
const SHORT_WORD: usize = 7;

#[derive(Debug, Clone, PartialEq)]
pub struct OovContext {
    pub ngram_min: usize,
    pub ngram_max: usize,
    pub bow: char,
    pub eow: char,
    /// Weight of the n-gram base vector.
    pub alpha: f64,
    /// Weight of the string-similar neighbours.
    pub beta: f64,
    pub match_k: usize,
    /// Maximum candidates scored per lookup.
    pub pool_cap: usize,
}

impl Default for OovContext {
    fn default() -> Self {
        Self {
            ngram_min: DEFAULT_NGRAM_MIN,
            ngram_max: DEFAULT_NGRAM_MAX,
            bow: BOW,
            eow: EOW,
            alpha: 0.3,
            beta: 0.7,
            match_k: 3,
            pool_cap: 1000,
        }
    }
}

impl OovContext {
    /// Defaults with the n-gram range recorded in a store.
    pub fn for_store(meta: &StoreMetadata) -> Self {
        Self {
            ngram_min: meta.ngram_min,
            ngram_max: meta.ngram_max,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        crate::meta::validate_ngram_range(self.ngram_min, self.ngram_max)?;
        if self.alpha < 0.0 || self.beta < 0.0 || ((self.alpha + self.beta) - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidArgument(format!(
                "interpolation weights must be non-negative and sum to 1, got {} and {}",
                self.alpha, self.beta
            )));
        }
        if self.match_k == 0 || self.pool_cap == 0 {
            return Err(Error::InvalidArgument("match_k and pool_cap must be >= 1".into()));
        }
        Ok(())
    }

    pub fn ngrams(&self, word: &str) -> Result<Vec<String>> {
        char_ngrams_with(word, self.ngram_min, self.ngram_max, self.bow, self.eow)
    }
}

/// Collapses every run of three or more identical characters to two.
pub fn shrink_repeats(word: &str) -> String {
    let mut out = String::with_capacity(word.len());
    let mut prev = None;
    let mut run = 0;
    for c in word.chars() {
        if Some(c) == prev {
            run += 1;
        } else {
            prev = Some(c);
            run = 1;
        }
        if run <= 2 {
            out.push(c);
        }
    }
    out
}

/// Unique n-grams of the sentinel-padded word, ordered by length and then
/// position of first occurrence.
pub fn char_ngrams(word: &str, nmin: usize, nmax: usize) -> Result<Vec<String>> {
    char_ngrams_with(word, nmin, nmax, BOW, EOW)
}

pub fn char_ngrams_with(
    word: &str,
    nmin: usize,
    nmax: usize,
    bow: char,
    eow: char,
) -> Result<Vec<String>> {
    Ok(positioned_ngrams(word, nmin, nmax, bow, eow)?
        .into_iter()
        .map(|(g, _)| g)
        .collect())
}

/// Unique n-grams with the padded index of their first occurrence.
fn positioned_ngrams(
    word: &str,
    nmin: usize,
    nmax: usize,
    bow: char,
    eow: char,
) -> Result<Vec<(String, usize)>> {
    if word.trim().is_empty() {
        return Err(Error::EmptyWord);
    }
    let padded: Vec<char> = std::iter::once(bow)
        .chain(word.chars())
        .chain(std::iter::once(eow))
        .collect();
    let mut seen = std::collections::HashSet::new();
    let mut out = Vec::new();
    for n in nmin..=nmax.min(padded.len()) {
        for start in 0..=padded.len() - n {
            let g: String = padded[start..start + n].iter().collect();
            if seen.insert(g.clone()) {
                out.push((g, start));
            }
        }
    }
    Ok(out)
}

/// Base vector: normalized sum of one pseudorandom vector per unique n-gram.
pub fn oov_base_vector(word: &str, d: usize, ctx: &OovContext) -> Result<EmbeddingVector> {
    let base = base_vector_f64(word, d, ctx)?;
    Ok(to_f32(&base))
}

fn base_vector_f64(word: &str, d: usize, ctx: &OovContext) -> Result<Vec<f64>> {
    if d == 0 {
        return Err(Error::EmptyVector);
    }
    let grams = ctx.ngrams(word)?;
    let mut acc = vec![0.0f64; d];
    for g in &grams {
        prvg_accumulate(hash32(g.as_bytes()), &mut acc);
    }
    match normalize_f64(&acc) {
        Ok(v) => Ok(v),
        // No n-grams (range longer than the padded word) or exact
        // cancellation: fall back to the word's own seed.
        Err(_) => normalize_f64(&prvg(hash32(word.as_bytes()), d)),
    }
}

fn to_f32(v: &[f64]) -> EmbeddingVector {
    EmbeddingVector::from_raw(v.iter().map(|&c| c as f32).collect())
}

/// A string-similar key and its score.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Candidate {
    pub ordinal: Ordinal,
    pub score: f64,
}

/// N-gram → weight (1.0 for n-grams starting in the first half of the padded
/// word, 0.4 otherwise).
pub(crate) fn ngram_weights(word: &str, ctx: &OovContext) -> Result<BTreeMap<String, f64>> {
    let padded_len = word.chars().count() + 2;
    let mut out = BTreeMap::new();
    for (g, start) in positioned_ngrams(word, ctx.ngram_min, ctx.ngram_max, ctx.bow, ctx.eow)? {
        let w = if 2 * start < padded_len { 1.0 } else { SUFFIX_WEIGHT };
        out.insert(g, w);
    }
    Ok(out)
}

// Ordered maps keep the floating-point sums reproducible across processes.
fn weighted_jaccard(a: &BTreeMap<String, f64>, b: &BTreeMap<String, f64>) -> f64 {
    let mut num = 0.0;
    let mut den = 0.0;
    for (g, &wa) in a {
        let wb = b.get(g).copied().unwrap_or(0.0);
        num += wa.min(wb);
        den += wa.max(wb);
    }
    for (g, &wb) in b {
        if !a.contains_key(g) {
            den += wb;
        }
    }
    if den == 0.0 {
        0.0
    } else {
        num / den
    }
}

/// Scores a stored key against an already-shrunk query.
///
/// `score = WJ · (0.7 + 0.3 · min(len)/max(len)) + bonus`, where WJ is the
/// weighted Jaccard of the two padded n-gram sets and the bonus adds 0.05
/// each for a shared first and last character when the query has at most
/// seven characters.
pub(crate) struct Scorer<'a> {
    ctx: &'a OovContext,
    query: Vec<char>,
    weights: BTreeMap<String, f64>,
}

impl<'a> Scorer<'a> {
    pub(crate) fn new(shrunk_query: &str, ctx: &'a OovContext) -> Result<Self> {
        Ok(Self {
            ctx,
            query: shrunk_query.chars().collect(),
            weights: ngram_weights(shrunk_query, ctx)?,
        })
    }

    pub(crate) fn score(&self, key: &str) -> Result<f64> {
        let shrunk = shrink_repeats(key);
        let key_chars: Vec<char> = shrunk.chars().collect();
        let wj = weighted_jaccard(&self.weights, &ngram_weights(&shrunk, self.ctx)?);
        let (lq, lk) = (self.query.len(), key_chars.len());
        let length = lq.min(lk) as f64 / lq.max(lk) as f64;
        let mut score = wj * ((1.0 - LENGTH_WEIGHT) + LENGTH_WEIGHT * length);
        if lq <= SHORT_WORD {
            if self.query.first() == key_chars.first() {
                score += EDGE_BONUS;
            }
            if self.query.last() == key_chars.last() {
                score += EDGE_BONUS;
            }
        }
        Ok(score)
    }
}

fn require_ngrams(r: &StoreReader, operation: &'static str) -> Result<()> {
    let tier = r.metadata().tier;
    if !tier.has_ngrams() {
        return Err(Error::TierUnsupported { operation, tier });
    }
    Ok(())
}

/// Keys sharing at least one indexed n-gram with `shrink_repeats(word)`,
/// best first.
///
/// At most `pool_cap` keys (those sharing the most n-grams, ties by ordinal)
/// are scored. Results are sorted by score descending, then key ascending.
pub fn string_similarity_candidates(
    r: &StoreReader,
    word: &str,
    pool_cap: usize,
) -> Result<Vec<Candidate>> {
    string_similarity_candidates_with(r, word, pool_cap, &OovContext::for_store(r.metadata()))
}

pub fn string_similarity_candidates_with(
    r: &StoreReader,
    word: &str,
    pool_cap: usize,
    ctx: &OovContext,
) -> Result<Vec<Candidate>> {
    require_ngrams(r, "string-similarity matching")?;
    let shrunk = shrink_repeats(word);
    let grams = ctx.ngrams(&shrunk)?;

    let mut shared: HashMap<Ordinal, u32> = HashMap::new();
    for g in &grams {
        if let Some(entry) = r.ngram_entry(g)? {
            if entry.omitted {
                continue;
            }
            for o in r.entry_postings(&entry)? {
                *shared.entry(o).or_insert(0) += 1;
            }
        }
    }
    let mut pool: Vec<(Ordinal, u32)> = shared.into_iter().collect();
    pool.sort_unstable_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
    pool.truncate(pool_cap);

    let scorer = Scorer::new(&shrunk, ctx)?;
    let mut out = pool
        .into_iter()
        .map(|(ordinal, _)| {
            Ok(Candidate {
                ordinal,
                score: scorer.score(r.key(ordinal)?)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    // Ordinals follow key byte order, so they break ties lexicographically.
    out.sort_by(|a, b| b.score.total_cmp(&a.score).then(a.ordinal.cmp(&b.ordinal)));
    Ok(out)
}

/// Normalized mean of the vectors of the `k` most string-similar keys.
pub fn match_mean(r: &StoreReader, word: &str, k: usize) -> Result<EmbeddingVector> {
    let ctx = OovContext {
        match_k: k,
        ..OovContext::for_store(r.metadata())
    };
    Ok(to_f32(&match_mean_f64(r, word, &ctx)?))
}

fn match_mean_f64(r: &StoreReader, word: &str, ctx: &OovContext) -> Result<Vec<f64>> {
    let candidates = string_similarity_candidates_with(r, word, ctx.pool_cap, ctx)?;
    if candidates.is_empty() {
        return Err(Error::NoCandidates(word.to_owned()));
    }
    let top = &candidates[..ctx.match_k.min(candidates.len())];
    let d = r.metadata().dimension;
    let mut acc = vec![0.0f64; d];
    let mut row = vec![0.0f32; d];
    for c in top {
        r.row_into(c.ordinal, &mut row)?;
        for (a, &x) in acc.iter_mut().zip(&row) {
            *a += x as f64;
        }
    }
    let n = top.len() as f64;
    acc.iter_mut().for_each(|a| *a /= n);
    normalize_f64(&acc)
}

/// OOV vector for `word` against a store.
///
/// Light stores (and words with no string-similar keys) get the base vector
/// alone; otherwise `normalize(α·base + β·match_mean)`.
pub fn oov_vector(r: &StoreReader, word: &str, ctx: &OovContext) -> Result<EmbeddingVector> {
    let d = r.metadata().dimension;
    let base = base_vector_f64(word, d, ctx)?;
    if !r.metadata().tier.has_ngrams() {
        return Ok(to_f32(&base));
    }
    let matched = match match_mean_f64(r, word, ctx) {
        Ok(m) => m,
        Err(Error::NoCandidates(_)) => return Ok(to_f32(&base)),
        Err(e) => return Err(e),
    };
    let mixed: Vec<f64> = base
        .iter()
        .zip(&matched)
        .map(|(b, m)| ctx.alpha * b + ctx.beta * m)
        .collect();
    match normalize_f64(&mixed) {
        Ok(v) => Ok(to_f32(&v)),
        // Exactly opposed components; the base vector is still a valid answer.
        Err(_) => Ok(to_f32(&base)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::vector::cosine;

    #[test]
    fn shrink_examples() {
        assert_eq!(shrink_repeats("hiiiiiiii"), "hii");
        assert_eq!(shrink_repeats("abc"), "abc");
        assert_eq!(shrink_repeats("aaabbbbc"), "aabbc");
        assert_eq!(shrink_repeats(""), "");
        assert_eq!(shrink_repeats("zzz"), "zz");
        assert_eq!(shrink_repeats("ééé"), "éé");
    }

    #[test]
    fn ngrams_of_cat() {
        let g = char_ngrams("cat", 3, 6).unwrap();
        let expected = [
            "\u{1}ca", "cat", "at\u{2}", "\u{1}cat", "cat\u{2}", "\u{1}cat\u{2}",
        ];
        assert_eq!(g, expected);
    }

    #[test]
    fn ngram_counts_short_words() {
        assert_eq!(char_ngrams("hi", 3, 6).unwrap().len(), 3);
        assert_eq!(char_ngrams("a", 3, 6).unwrap(), vec!["\u{1}a\u{2}"]);
        assert!(matches!(char_ngrams("  ", 3, 6), Err(Error::EmptyWord)));
        assert!(matches!(char_ngrams("", 3, 6), Err(Error::EmptyWord)));
        // Repeated substrings appear once.
        let g = char_ngrams("aaaa", 3, 3).unwrap();
        assert_eq!(g, vec!["\u{1}aa", "aaa", "aa\u{2}"]);
    }

    #[test]
    fn base_vector_is_deterministic_unit() {
        let ctx = OovContext::default();
        let a = oov_base_vector("uberx", 300, &ctx).unwrap();
        let b = oov_base_vector("uberx", 300, &ctx).unwrap();
        assert_eq!(a, b);
        assert!(a.is_normalized());
    }

    #[test]
    fn base_vectors_of_shared_spelling_align() {
        let ctx = OovContext::default();
        let a = oov_base_vector("uberx", 300, &ctx).unwrap();
        let b = oov_base_vector("uberxl", 300, &ctx).unwrap();
        // 10 of the 14 and 18 n-grams are shared, so the expected cosine of
        // the two pseudorandom sums is 10 / sqrt(14 * 18) = 0.630.
        let c = cosine(&a, &b).unwrap();
        assert!((c - 0.630).abs() < 0.08, "cosine {c}");
    }

    #[test]
    fn base_vector_falls_back_without_ngrams() {
        let ctx = OovContext {
            ngram_min: 5,
            ngram_max: 6,
            ..OovContext::default()
        };
        // "ab" pads to 4 characters, shorter than any n-gram.
        let v = oov_base_vector("ab", 16, &ctx).unwrap();
        assert!(v.is_normalized());
        let direct = normalize_f64(&prvg(hash32(b"ab"), 16)).unwrap();
        assert_eq!(v, to_f32(&direct));
    }

    #[test]
    fn weights_favor_stems() {
        let ctx = OovContext::default();
        let w = ngram_weights("uberification", &ctx).unwrap();
        assert_eq!(w["\u{1}ub"], 1.0);
        assert_eq!(w["ion\u{2}"], SUFFIX_WEIGHT);
    }

    #[test]
    fn scorer_self_match_is_maximal() {
        let ctx = OovContext::default();
        let s = Scorer::new("cat", &ctx).unwrap();
        assert!((s.score("cat").unwrap() - 1.1).abs() < 1e-12);
        assert!(s.score("cats").unwrap() < 1.1);
        let long = Scorer::new("discriminatory", &ctx).unwrap();
        assert!((long.score("discriminatory").unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn context_validation() {
        assert!(OovContext::default().validate().is_ok());
        let bad = OovContext {
            alpha: 0.5,
            ..OovContext::default()
        };
        assert!(bad.validate().is_err());
    }
}
