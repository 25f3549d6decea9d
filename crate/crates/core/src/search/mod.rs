//! Similarity search over a store.
//!
//! [`exact_topk`] scans every row. [`approx_topk`] walks a
//! [`ProjectionForest`] and re-scores the leaves it reaches, so the
//! similarities it reports are exact even when the result set is not.
//!
//! All result lists are ordered by similarity descending, then by key bytes
//! ascending.

mod exact;
pub mod forest;

pub use exact::{analogy, closer_than, exact_topk, AnalogyMethod};
pub use forest::{
    approx_topk, build_forest, search_budget, ForestStats, ProjectionForest, RowSource,
};

pub(crate) use exact::{to_hits, topk_by_ordinal};
pub(crate) use forest::approx_topk_excluding;

#[derive(Debug, Clone, PartialEq)]
pub struct SearchHit {
    pub key: String,
    /// Cosine similarity, or the objective score for analogy queries.
    pub similarity: f32,
}
