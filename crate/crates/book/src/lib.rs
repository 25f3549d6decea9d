//! The guide in `book/src` compiled as doc-tests, one module per chapter, so
//! every snippet in the book runs under `cargo test`.

#[doc = include_str!("../../../book/src/introduction.md")]
pub mod introduction {}
#[doc = include_str!("../../../book/src/converting.md")]
pub mod converting {}
#[doc = include_str!("../../../book/src/querying.md")]
pub mod querying {}
#[doc = include_str!("../../../book/src/oov.md")]
pub mod oov {}
#[doc = include_str!("../../../book/src/quantization.md")]
pub mod quantization {}
#[doc = include_str!("../../../book/src/search.md")]
pub mod search {}
#[doc = include_str!("../../../book/src/concatenation.md")]
pub mod concatenation {}
#[doc = include_str!("../../../book/src/caching.md")]
pub mod caching {}
#[doc = include_str!("../../../book/src/format.md")]
pub mod format {}
#[doc = include_str!("../../../book/src/cli.md")]
pub mod cli {}
