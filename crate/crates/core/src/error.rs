use std::io;

use crate::meta::Tier;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("vector has zero norm")]
    ZeroVector,

    #[error("vector must have at least one component")]
    EmptyVector,

    #[error("non-finite component at index {index}")]
    NonFinite { index: usize },

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("value {value} does not fit in a {byte_width}-byte code at precision {precision}")]
    Overflow {
        value: f64,
        precision: u32,
        byte_width: usize,
    },

    #[error("precision {0} is out of range (0..=18)")]
    InvalidPrecision(u32),

    #[error("unknown embedding format: {0}")]
    UnknownFormat(String),

    #[error("malformed record {record} (at {location}): {reason}")]
    MalformedRecord {
        record: u64,
        location: String,
        reason: String,
    },

    #[error("record {record} has dimension {actual}, expected {expected}")]
    DimensionDrift {
        record: u64,
        expected: usize,
        actual: usize,
    },

    #[error("no usable records in input")]
    EmptyInput,

    #[error("bad magic {found:?} at offset 0")]
    BadMagic { found: [u8; 4] },

    #[error("unsupported store format version {found} (this build reads {supported})")]
    UnsupportedVersion { found: u16, supported: u16 },

    #[error("truncated file: need bytes {offset}..{end} but file has {file_len}")]
    TruncatedFile { offset: u64, end: u64, file_len: u64 },

    #[error("corrupt {section} section at offset {offset}: {reason}")]
    CorruptSection {
        section: &'static str,
        offset: u64,
        reason: String,
    },

    #[error("corrupt ANN section: checksum {actual:#018x} != recorded {expected:#018x}")]
    CorruptAnnSection { expected: u64, actual: u64 },

    #[error("{operation} is not supported on a {tier} store")]
    TierUnsupported { operation: &'static str, tier: Tier },

    #[error("ordinal {ordinal} out of range (key count {key_count})")]
    OrdinalOutOfRange { ordinal: u64, key_count: u64 },

    #[error("n-gram {0:?} occurs in too many keys and was omitted from the index")]
    NgramOmitted(String),

    #[error("word is empty")]
    EmptyWord,

    #[error("key is empty")]
    EmptyKey,

    #[error("no string-similar candidates for {0:?}")]
    NoCandidates(String),

    #[error("key not found: {0:?}")]
    KeyNotFound(String),

    #[error("analogy requires at least one positive key")]
    EmptyPositive,

    #[error("effort {0} is outside [0, 1]")]
    EffortOutOfRange(f32),

    #[error("need at least 2 vectors to build a forest, got {0}")]
    TooFewVectors(usize),

    #[error("featurizer needs N >= 1, got {0}")]
    InvalidN(u64),

    #[error("empty query")]
    EmptyQuery,

    #[error("tuple has {actual} keys but the session has {expected} members")]
    TupleArityMismatch { expected: usize, actual: usize },

    #[error("similarity search is only available on single-store sessions")]
    ConcatenatedSearch,

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error(transparent)]
    Io(#[from] io::Error),
}
