//! A compact, memory-mapped, quantized key → vector store for word
//! embeddings.
//!
//! A converter ([`write_store`]) compiles word2vec, GloVe or fastText files
//! into an immutable store file. A [`StoreReader`] opens that file by reading
//! a few hundred bytes and mapping the rest, and a [`QuerySession`] layers
//! caching, out-of-vocabulary synthesis, similarity search and concatenation
//! on top.
//!
//! ```no_run
//! use vecstore::{QuerySession, SearchMethod};
//!
//! # fn main() -> vecstore::Result<()> {
//! let vectors = QuerySession::open("glove.vst")?;
//! let king = vectors.query_key("king")?;
//! assert_eq!(king.len(), vectors.dimension());
//! let near = vectors.most_similar("king", 5, SearchMethod::Exact)?;
//! println!("{near:?}");
//! // Keys that are not in the store still get a vector.
//! let sim = vectors.similarity("discrimnatory", "discriminatory")?;
//! # Ok(()) }
//! ```

pub mod error;
pub mod featurizer;
pub mod format;
pub mod hashing;
pub mod ingest;
pub mod meta;
pub mod oov;
pub mod quantize;
pub mod search;
pub mod session;
pub mod synthetic;
pub mod vector;

pub use error::{Error, Result};
pub use featurizer::{featurizer_dim, featurizer_query, FeaturizerSpec};
pub use format::{write_store, AnnParams, Ordinal, ReaderOptions, StoreOptions, StoreReader, WriteSummary};
pub use hashing::{hash32, prvg};
pub use ingest::{detect_format, parse_embeddings, EmbeddingReader, ParsedRecord, SourceFormat};
pub use meta::{StoreMetadata, Tier};
pub use oov::{
    char_ngrams, match_mean, oov_base_vector, oov_vector, shrink_repeats,
    string_similarity_candidates, Candidate, OovContext,
};
pub use quantize::QuantizationSpec;
pub use search::{
    analogy, approx_topk, build_forest, closer_than, exact_topk, AnalogyMethod, ProjectionForest,
    SearchHit,
};
pub use session::{Member, Query, QueryOutput, QuerySession, SearchMethod, SessionOptions, Target};
pub use vector::{cosine, normalize, EmbeddingVector};
