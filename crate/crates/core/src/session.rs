//! The query facade: one or more stores (and featurizers) behind a single
//! key → vector interface, with LRU caching.
//!
//! A session with several members concatenates their vectors, so a 300-d
//! store followed by a 50-d store answers every query with 350 values.
//! Out-of-vocabulary keys are synthesized per member, which means every key
//! has a vector.

use std::hash::Hash;
use std::num::NonZeroUsize;
use std::path::Path;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex};

use lru::LruCache;
use ndarray::{Array1, Array2, Array3};

use crate::error::{Error, Result};
use crate::featurizer::FeaturizerSpec;
use crate::format::StoreReader;
use crate::oov::{oov_vector, OovContext};
use crate::search::{
    analogy, approx_topk_excluding, closer_than, topk_by_ordinal, AnalogyMethod, SearchHit,
};
use crate::vector::{cosine_slices, EmbeddingVector};

/// Environment variable overriding the key-cache capacity.
pub const CACHE_SIZE_ENV: &str = "VECSTORE_CACHE_SIZE";
pub const DEFAULT_KEY_CACHE: usize = 1000;
pub const DEFAULT_RESULT_CACHE: usize = 128;

/// One source of vectors in a session.
#[derive(Debug, Clone)]
pub enum Member {
    Store(Arc<StoreReader>),
    Featurizer(FeaturizerSpec),
}

impl Member {
    pub fn dimension(&self) -> usize {
        match self {
            Member::Store(r) => r.dimension(),
            Member::Featurizer(f) => f.dimension(),
        }
    }
}

impl From<StoreReader> for Member {
    fn from(r: StoreReader) -> Self {
        Member::Store(Arc::new(r))
    }
}

impl From<Arc<StoreReader>> for Member {
    fn from(r: Arc<StoreReader>) -> Self {
        Member::Store(r)
    }
}

impl From<FeaturizerSpec> for Member {
    fn from(f: FeaturizerSpec) -> Self {
        Member::Featurizer(f)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SessionOptions {
    /// Per-member key → vector entries kept. 0 disables the cache.
    pub key_cache_capacity: usize,
    /// Memoized search results kept. 0 disables the cache.
    pub result_cache_capacity: usize,
    pub oov: Option<OovContext>,
}

impl Default for SessionOptions {
    fn default() -> Self {
        Self {
            key_cache_capacity: DEFAULT_KEY_CACHE,
            result_cache_capacity: DEFAULT_RESULT_CACHE,
            oov: None,
        }
    }
}

impl SessionOptions {
    /// Defaults, with the key-cache capacity taken from
    /// `VECSTORE_CACHE_SIZE` when it holds a non-negative integer.
    pub fn from_env() -> Self {
        let mut o = Self::default();
        if let Ok(v) = std::env::var(CACHE_SIZE_ENV) {
            match v.trim().parse() {
                Ok(n) => o.key_cache_capacity = n,
                Err(_) => log::warn!("ignoring {CACHE_SIZE_ENV}={v:?}: not a non-negative integer"),
            }
        }
        o
    }
}

/// What to search around.
#[derive(Debug, Clone, PartialEq)]
pub enum Target {
    /// A key; resolved through [`QuerySession::query_key`] (so OOV keys work)
    /// and excluded from its own results.
    Key(String),
    Vector(EmbeddingVector),
}

impl From<&str> for Target {
    fn from(k: &str) -> Self {
        Target::Key(k.to_owned())
    }
}

impl From<EmbeddingVector> for Target {
    fn from(v: EmbeddingVector) -> Self {
        Target::Vector(v)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum SearchMethod {
    #[default]
    Exact,
    /// Forest search with the given effort in `[0, 1]`; heavy stores only.
    Approximate(f32),
}

/// Query shapes accepted by [`QuerySession::query`].
#[derive(Debug, Clone, PartialEq)]
pub enum Query {
    Key(String),
    Keys(Vec<String>),
    /// Variable-length sequences, padded with zero vectors.
    Nested(Vec<Vec<String>>),
    /// One key per member.
    Tuple(Vec<String>),
}

impl From<&str> for Query {
    fn from(k: &str) -> Self {
        Query::Key(k.to_owned())
    }
}

impl From<Vec<&str>> for Query {
    fn from(k: Vec<&str>) -> Self {
        Query::Keys(k.into_iter().map(str::to_owned).collect())
    }
}

impl From<Vec<Vec<&str>>> for Query {
    fn from(k: Vec<Vec<&str>>) -> Self {
        Query::Nested(
            k.into_iter()
                .map(|row| row.into_iter().map(str::to_owned).collect())
                .collect(),
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum QueryOutput {
    Vector(Array1<f32>),
    Matrix(Array2<f32>),
    Block(Array3<f32>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct CacheStats {
    pub key_hits: u64,
    pub key_misses: u64,
    pub result_hits: u64,
    pub result_misses: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
enum TargetKey {
    Key(String),
    Vector(Vec<u32>),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
enum ResultKey {
    MostSimilar {
        target: TargetKey,
        topn: usize,
        /// `None` for exact, else the effort's bits.
        effort: Option<u32>,
    },
    Analogy {
        positive: Vec<String>,
        negative: Vec<String>,
        mul: bool,
        topn: usize,
    },
    CloserThan(String, String),
}

/// Mutex-guarded LRU with hit counters; absent when capacity is 0.
struct Cache<K: Hash + Eq, V: Clone> {
    inner: Option<Mutex<LruCache<K, V>>>,
    hits: AtomicU64,
    misses: AtomicU64,
}

impl<K: Hash + Eq, V: Clone> Cache<K, V> {
    fn new(capacity: usize) -> Self {
        Self {
            inner: NonZeroUsize::new(capacity).map(|c| Mutex::new(LruCache::new(c))),
            hits: AtomicU64::new(0),
            misses: AtomicU64::new(0),
        }
    }

    fn get_or_try(&self, key: K, compute: impl FnOnce() -> Result<V>) -> Result<V> {
        let Some(inner) = &self.inner else {
            return compute();
        };
        if let Some(v) = inner.lock().expect("cache lock").get(&key) {
            self.hits.fetch_add(1, Ordering::Relaxed);
            return Ok(v.clone());
        }
        self.misses.fetch_add(1, Ordering::Relaxed);
        // Computed outside the lock; a racing thread may compute the same
        // value, which is harmless because values are deterministic.
        let v = compute()?;
        inner.lock().expect("cache lock").put(key, v.clone());
        Ok(v)
    }

    fn clear(&self) {
        if let Some(inner) = &self.inner {
            inner.lock().expect("cache lock").clear();
        }
    }
}

pub struct QuerySession {
    members: Vec<Member>,
    contexts: Vec<OovContext>,
    total_dimension: usize,
    keys: Cache<(usize, String), Arc<[f32]>>,
    results: Cache<ResultKey, Arc<Vec<SearchHit>>>,
}

impl std::fmt::Debug for QuerySession {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("QuerySession")
            .field("members", &self.members)
            .field("total_dimension", &self.total_dimension)
            .finish_non_exhaustive()
    }
}

impl QuerySession {
    /// Opens a single store with options from the environment.
    pub fn open(path: impl AsRef<Path>) -> Result<Self> {
        Self::new(vec![StoreReader::open(path)?.into()])
    }

    /// A session over `members`, concatenated in order.
    pub fn new(members: Vec<Member>) -> Result<Self> {
        Self::with_options(members, SessionOptions::from_env())
    }

    pub fn with_options(members: Vec<Member>, options: SessionOptions) -> Result<Self> {
        if members.is_empty() {
            return Err(Error::InvalidArgument("a session needs at least one member".into()));
        }
        let contexts = members
            .iter()
            .map(|m| match (m, &options.oov) {
                (_, Some(ctx)) => ctx.clone(),
                (Member::Store(r), None) => OovContext::for_store(r.metadata()),
                (Member::Featurizer(_), None) => OovContext::default(),
            })
            .collect();
        Ok(Self {
            total_dimension: members.iter().map(Member::dimension).sum(),
            members,
            contexts,
            keys: Cache::new(options.key_cache_capacity),
            results: Cache::new(options.result_cache_capacity),
        })
    }

    pub fn members(&self) -> &[Member] {
        &self.members
    }

    /// Width of every vector this session returns.
    pub fn dimension(&self) -> usize {
        self.total_dimension
    }

    pub fn cache_stats(&self) -> CacheStats {
        CacheStats {
            key_hits: self.keys.hits.load(Ordering::Relaxed),
            key_misses: self.keys.misses.load(Ordering::Relaxed),
            result_hits: self.results.hits.load(Ordering::Relaxed),
            result_misses: self.results.misses.load(Ordering::Relaxed),
        }
    }

    pub fn clear_caches(&self) {
        self.keys.clear();
        self.results.clear();
    }

    /// True when every store member holds `key` exactly. Featurizers accept
    /// every key.
    pub fn contains(&self, key: &str) -> bool {
        self.members.iter().all(|m| match m {
            Member::Store(r) => r.contains(key),
            Member::Featurizer(_) => true,
        })
    }

    fn member_vector(&self, i: usize, key: &str) -> Result<Arc<[f32]>> {
        self.keys.get_or_try((i, key.to_owned()), || {
            let v = match &self.members[i] {
                Member::Store(r) => match r.lookup_key(key) {
                    Some(o) => r.read_vector(o)?,
                    None => oov_vector(r, key, &self.contexts[i])?,
                },
                Member::Featurizer(f) => f.query(key)?,
            };
            Ok(Arc::from(v.into_inner()))
        })
    }

    fn fill_key(&self, key: &str, out: &mut [f32]) -> Result<()> {
        let mut at = 0;
        for (i, m) in self.members.iter().enumerate() {
            let d = m.dimension();
            out[at..at + d].copy_from_slice(&self.member_vector(i, key)?);
            at += d;
        }
        Ok(())
    }

    /// Vector for one key: the stored vector where present, otherwise a
    /// synthesized one, concatenated across members.
    pub fn query_key(&self, key: &str) -> Result<Array1<f32>> {
        let mut out = vec![0.0; self.total_dimension];
        self.fill_key(key, &mut out)?;
        Ok(Array1::from_vec(out))
    }

    /// One row per key, in input order.
    pub fn query_keys<S: AsRef<str>>(&self, keys: &[S]) -> Result<Array2<f32>> {
        if keys.is_empty() {
            return Err(Error::EmptyQuery);
        }
        let d = self.total_dimension;
        let mut out = vec![0.0; keys.len() * d];
        for (k, row) in keys.iter().zip(out.chunks_exact_mut(d)) {
            self.fill_key(k.as_ref(), row)?;
        }
        Ok(Array2::from_shape_vec((keys.len(), d), out).expect("shape matches"))
    }

    /// `sequences.len() × longest × dimension`; shorter sequences are padded
    /// with zero vectors.
    pub fn query_nested<S: AsRef<str>>(&self, sequences: &[Vec<S>]) -> Result<Array3<f32>> {
        let longest = sequences.iter().map(Vec::len).max().unwrap_or(0);
        if longest == 0 {
            return Err(Error::EmptyQuery);
        }
        let d = self.total_dimension;
        let mut out = vec![0.0; sequences.len() * longest * d];
        for (seq, block) in sequences.iter().zip(out.chunks_exact_mut(longest * d)) {
            for (k, row) in seq.iter().zip(block.chunks_exact_mut(d)) {
                self.fill_key(k.as_ref(), row)?;
            }
        }
        Ok(Array3::from_shape_vec((sequences.len(), longest, d), out).expect("shape matches"))
    }

    /// Member `i` is queried with `keys[i]`.
    pub fn query_tuple<S: AsRef<str>>(&self, keys: &[S]) -> Result<Array1<f32>> {
        if keys.len() != self.members.len() {
            return Err(Error::TupleArityMismatch {
                expected: self.members.len(),
                actual: keys.len(),
            });
        }
        let mut out = Vec::with_capacity(self.total_dimension);
        for (i, k) in keys.iter().enumerate() {
            out.extend_from_slice(&self.member_vector(i, k.as_ref())?);
        }
        Ok(Array1::from_vec(out))
    }

    pub fn query(&self, q: impl Into<Query>) -> Result<QueryOutput> {
        Ok(match q.into() {
            Query::Key(k) => QueryOutput::Vector(self.query_key(&k)?),
            Query::Keys(k) => QueryOutput::Matrix(self.query_keys(&k)?),
            Query::Nested(k) => QueryOutput::Block(self.query_nested(&k)?),
            Query::Tuple(k) => QueryOutput::Vector(self.query_tuple(&k)?),
        })
    }

    /// Cosine similarity of the two keys' session vectors.
    pub fn similarity(&self, a: &str, b: &str) -> Result<f32> {
        let va = self.query_key(a)?;
        let vb = self.query_key(b)?;
        Ok(cosine_slices(
            va.as_slice().expect("contiguous"),
            vb.as_slice().expect("contiguous"),
        ))
    }

    fn single_store(&self) -> Result<&StoreReader> {
        match self.members.as_slice() {
            [Member::Store(r)] => Ok(r),
            [Member::Featurizer(_)] => Err(Error::InvalidArgument(
                "featurizer sessions have no stored vectors to search".into(),
            )),
            _ => Err(Error::ConcatenatedSearch),
        }
    }

    fn cached(
        &self,
        key: ResultKey,
        compute: impl FnOnce() -> Result<Vec<SearchHit>>,
    ) -> Result<Vec<SearchHit>> {
        let hits = self.results.get_or_try(key, || compute().map(Arc::new))?;
        Ok(hits.as_ref().clone())
    }

    /// Nearest keys to `target`. Results are memoized.
    pub fn most_similar(
        &self,
        target: impl Into<Target>,
        topn: usize,
        method: SearchMethod,
    ) -> Result<Vec<SearchHit>> {
        let r = self.single_store()?;
        let target = target.into();
        let key = ResultKey::MostSimilar {
            target: match &target {
                Target::Key(k) => TargetKey::Key(k.clone()),
                Target::Vector(v) => TargetKey::Vector(v.iter().map(|x| x.to_bits()).collect()),
            },
            topn,
            effort: match method {
                SearchMethod::Exact => None,
                SearchMethod::Approximate(e) => Some(e.to_bits()),
            },
        };
        self.cached(key, || {
            let (q, exclude) = match &target {
                Target::Key(k) => (
                    EmbeddingVector::new(self.query_key(k)?.to_vec())?,
                    vec![k.as_str()],
                ),
                Target::Vector(v) => (v.clone(), Vec::new()),
            };
            match method {
                SearchMethod::Exact => {
                    if q.dimension() != r.dimension() {
                        return Err(Error::DimensionMismatch {
                            expected: r.dimension(),
                            actual: q.dimension(),
                        });
                    }
                    if topn == 0 {
                        return Err(Error::InvalidArgument("topn must be >= 1".into()));
                    }
                    let excluded = exclude.iter().filter_map(|k| r.lookup_key(k)).collect();
                    crate::search::to_hits(r, topk_by_ordinal(r, &q, topn, &excluded))
                }
                SearchMethod::Approximate(effort) => {
                    if !r.tier().has_ann() {
                        return Err(Error::TierUnsupported {
                            operation: "approximate search",
                            tier: r.tier(),
                        });
                    }
                    let forest = r.load_ann()?;
                    approx_topk_excluding(&forest, r, &q, topn, effort, &exclude)
                }
            }
        })
    }

    /// Analogy completion (3CosAdd or 3CosMul). Results are memoized.
    pub fn analogy(
        &self,
        positive: &[&str],
        negative: &[&str],
        method: AnalogyMethod,
        topn: usize,
    ) -> Result<Vec<SearchHit>> {
        let r = self.single_store()?;
        let key = ResultKey::Analogy {
            positive: positive.iter().map(|s| s.to_string()).collect(),
            negative: negative.iter().map(|s| s.to_string()).collect(),
            mul: method == AnalogyMethod::Mul,
            topn,
        };
        self.cached(key, || analogy(r, positive, negative, method, topn))
    }

    /// Keys closer to `a` than `b` is. Results are memoized.
    pub fn closer_than(&self, a: &str, b: &str) -> Result<Vec<SearchHit>> {
        let r = self.single_store()?;
        self.cached(ResultKey::CloserThan(a.to_owned(), b.to_owned()), || {
            closer_than(r, a, b)
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn featurizer_only_session() {
        let s = QuerySession::with_options(
            vec![FeaturizerSpec::new(100, "POS").unwrap().into()],
            SessionOptions::default(),
        )
        .unwrap();
        assert_eq!(s.dimension(), 4);
        assert!(s.contains("anything"));
        let v = s.query_key("NN").unwrap();
        assert_eq!(v.len(), 4);
        assert_eq!(s.similarity("NN", "NN").unwrap(), 1.0);
        assert!(matches!(
            s.most_similar("NN", 3, SearchMethod::Exact),
            Err(Error::InvalidArgument(_))
        ));
        assert!(matches!(
            s.query_keys::<&str>(&[]),
            Err(Error::EmptyQuery)
        ));
        assert!(matches!(
            s.query_tuple(&["a", "b"]),
            Err(Error::TupleArityMismatch { expected: 1, actual: 2 })
        ));
    }

    #[test]
    fn disabled_caches_count_nothing() {
        let s = QuerySession::with_options(
            vec![FeaturizerSpec::new(10, "x").unwrap().into()],
            SessionOptions {
                key_cache_capacity: 0,
                result_cache_capacity: 0,
                oov: None,
            },
        )
        .unwrap();
        s.query_key("a").unwrap();
        s.query_key("a").unwrap();
        assert_eq!(s.cache_stats(), CacheStats::default());
    }

    #[test]
    fn key_cache_hits_on_repeat() {
        let s = QuerySession::with_options(
            vec![FeaturizerSpec::new(10, "x").unwrap().into()],
            SessionOptions::default(),
        )
        .unwrap();
        let a = s.query_key("a").unwrap();
        let b = s.query_key("a").unwrap();
        assert_eq!(a, b);
        let st = s.cache_stats();
        assert_eq!((st.key_hits, st.key_misses), (1, 1));
    }
}
