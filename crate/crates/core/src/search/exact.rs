use std::cmp::{Ordering, Reverse};
use std::collections::{BinaryHeap, HashSet};

use super::SearchHit;
use crate::error::{Error, Result};
use crate::format::{Ordinal, StoreReader};
use crate::vector::{cosine_from_parts, EmbeddingVector};

/// A scored ordinal. `Ord` puts better results first: higher similarity,
/// then lower ordinal (keys are stored in byte order).
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct Scored {
    pub sim: f32,
    pub ordinal: Ordinal,
}

impl Eq for Scored {}

impl Ord for Scored {
    fn cmp(&self, other: &Self) -> Ordering {
        self.sim
            .total_cmp(&other.sim)
            .then(other.ordinal.cmp(&self.ordinal))
    }
}

impl PartialOrd for Scored {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Keeps the best `k` of a stream of scores.
pub(crate) struct TopK {
    k: usize,
    heap: BinaryHeap<Reverse<Scored>>,
}

impl TopK {
    pub(crate) fn new(k: usize) -> Self {
        Self {
            k,
            heap: BinaryHeap::with_capacity(k.min(1 << 16) + 1),
        }
    }

    #[inline]
    pub(crate) fn offer(&mut self, s: Scored) {
        if self.heap.len() < self.k {
            self.heap.push(Reverse(s));
        } else if let Some(mut worst) = self.heap.peek_mut() {
            if s > worst.0 {
                *worst = Reverse(s);
            }
        }
    }

    pub(crate) fn into_sorted(self) -> Vec<Scored> {
        // Ascending Reverse order is descending Scored order.
        self.heap.into_sorted_vec().into_iter().map(|r| r.0).collect()
    }
}

/// A query vector prepared for repeated scoring against stored rows.
pub(crate) struct PreparedQuery {
    q: Vec<f64>,
    nq: f64,
    row: Vec<f32>,
}

impl PreparedQuery {
    pub(crate) fn new(q: &[f32]) -> Self {
        let q: Vec<f64> = q.iter().map(|&x| x as f64).collect();
        let nq = q.iter().map(|x| x * x).sum();
        Self {
            row: vec![0.0; q.len()],
            q,
            nq,
        }
    }

    /// Cosine between the query and the row at `ordinal`, computed exactly
    /// as [`crate::vector::cosine`] would on the dequantized row.
    #[inline]
    pub(crate) fn score_raw(&mut self, r: &StoreReader, raw: &[u8]) -> f32 {
        r.quantization().decode_row(raw, &mut self.row);
        let (mut dot, mut nr) = (0.0f64, 0.0f64);
        for (&x, &y) in self.row.iter().zip(&self.q) {
            let x = x as f64;
            dot += x * y;
            nr += x * x;
        }
        cosine_from_parts(dot, nr, self.nq)
    }

    pub(crate) fn score(&mut self, r: &StoreReader, ordinal: Ordinal) -> f32 {
        self.score_raw(r, r.raw_row(ordinal))
    }
}

fn check_query(r: &StoreReader, q: &[f32], k: usize) -> Result<()> {
    if q.len() != r.dimension() {
        return Err(Error::DimensionMismatch {
            expected: r.dimension(),
            actual: q.len(),
        });
    }
    if k == 0 {
        return Err(Error::InvalidArgument("k must be >= 1".into()));
    }
    Ok(())
}

fn resolve_exclusions(r: &StoreReader, exclude: &[&str]) -> HashSet<Ordinal> {
    exclude.iter().filter_map(|k| r.lookup_key(k)).collect()
}

pub(crate) fn to_hits(r: &StoreReader, scored: Vec<Scored>) -> Result<Vec<SearchHit>> {
    scored
        .into_iter()
        .map(|s| {
            Ok(SearchHit {
                key: r.key(s.ordinal)?.to_owned(),
                similarity: s.sim,
            })
        })
        .collect()
}

/// Best `k` ordinals by full scan, skipping `exclude`.
pub(crate) fn topk_by_ordinal(
    r: &StoreReader,
    q: &[f32],
    k: usize,
    exclude: &HashSet<Ordinal>,
) -> Vec<Scored> {
    let mut pq = PreparedQuery::new(q);
    let mut top = TopK::new(k);
    let row_len = r.dimension() * r.quantization().byte_width();
    for (i, raw) in r.vector_block().chunks_exact(row_len).enumerate() {
        let ordinal = i as Ordinal;
        if exclude.contains(&ordinal) {
            continue;
        }
        top.offer(Scored {
            sim: pq.score_raw(r, raw),
            ordinal,
        });
    }
    top.into_sorted()
}

/// The `k` keys most cosine-similar to `q`, by a full scan of the vector
/// block. Keys in `exclude` are skipped; keys not in the store are ignored.
pub fn exact_topk(
    r: &StoreReader,
    q: &EmbeddingVector,
    k: usize,
    exclude: &[&str],
) -> Result<Vec<SearchHit>> {
    check_query(r, q, k)?;
    let exclude = resolve_exclusions(r, exclude);
    to_hits(r, topk_by_ordinal(r, q, k, &exclude))
}

fn require_key(r: &StoreReader, key: &str) -> Result<Ordinal> {
    r.lookup_key(key)
        .ok_or_else(|| Error::KeyNotFound(key.to_owned()))
}

/// Every key other than `a` that is strictly more similar to `a` than `b`
/// is, most similar first.
pub fn closer_than(r: &StoreReader, a: &str, b: &str) -> Result<Vec<SearchHit>> {
    let oa = require_key(r, a)?;
    let ob = require_key(r, b)?;
    let qa = r.read_vector(oa)?;
    let mut pq = PreparedQuery::new(&qa);
    let threshold = pq.score(r, ob);
    let row_len = r.dimension() * r.quantization().byte_width();
    let mut out = Vec::new();
    for (i, raw) in r.vector_block().chunks_exact(row_len).enumerate() {
        let ordinal = i as Ordinal;
        if ordinal == oa {
            continue;
        }
        let sim = pq.score_raw(r, raw);
        if sim > threshold {
            out.push(Scored { sim, ordinal });
        }
    }
    out.sort_unstable_by(|x, y| y.cmp(x));
    to_hits(r, out)
}

/// Objective for [`analogy`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum AnalogyMethod {
    /// `Σ cos(w, p) − Σ cos(w, n)`.
    #[default]
    Add,
    /// `Π ((cos(w, p) + 1) / 2) / (Π ((cos(w, n) + 1) / 2) + 1e-6)`.
    Mul,
}

const MUL_EPSILON: f64 = 1e-6;

/// Keys best completing "`negative` is to `positive` as ...", excluding the
/// input keys. Hits carry the objective score.
pub fn analogy(
    r: &StoreReader,
    positive: &[&str],
    negative: &[&str],
    method: AnalogyMethod,
    topn: usize,
) -> Result<Vec<SearchHit>> {
    if positive.is_empty() {
        return Err(Error::EmptyPositive);
    }
    if topn == 0 {
        return Err(Error::InvalidArgument("topn must be >= 1".into()));
    }
    let prepare = |keys: &[&str]| -> Result<(Vec<PreparedQuery>, Vec<Ordinal>)> {
        let mut queries = Vec::with_capacity(keys.len());
        let mut ordinals = Vec::with_capacity(keys.len());
        for k in keys {
            let o = require_key(r, k)?;
            queries.push(PreparedQuery::new(&r.read_vector(o)?));
            ordinals.push(o);
        }
        Ok((queries, ordinals))
    };
    let (mut pos, pos_ord) = prepare(positive)?;
    let (mut neg, neg_ord) = prepare(negative)?;
    let exclude: HashSet<Ordinal> = pos_ord.into_iter().chain(neg_ord).collect();

    let mut top = TopK::new(topn);
    let row_len = r.dimension() * r.quantization().byte_width();
    for (i, raw) in r.vector_block().chunks_exact(row_len).enumerate() {
        let ordinal = i as Ordinal;
        if exclude.contains(&ordinal) {
            continue;
        }
        let score = match method {
            AnalogyMethod::Add => {
                let p: f64 = pos.iter_mut().map(|q| q.score_raw(r, raw) as f64).sum();
                let n: f64 = neg.iter_mut().map(|q| q.score_raw(r, raw) as f64).sum();
                p - n
            }
            AnalogyMethod::Mul => {
                let shift = |c: f32| (c as f64 + 1.0) / 2.0;
                let p: f64 = pos.iter_mut().map(|q| shift(q.score_raw(r, raw))).product();
                let n: f64 = neg.iter_mut().map(|q| shift(q.score_raw(r, raw))).product();
                p / (n + MUL_EPSILON)
            }
        };
        top.offer(Scored {
            sim: score as f32,
            ordinal,
        });
    }
    to_hits(r, top.into_sorted())
}
