//! The immutable store file.
//!
//! Everything is little-endian. A file is an 8-byte header, a section table,
//! and 8-byte-aligned sections:
//!
//! ```text
//! header        "MVST" | version: u16 | section_count: u16
//! section table section_count × { id: u32, flags: u32, offset: u64,
//!                                 length: u64, checksum: u64 (xxh64) }
//! ```
//!
//! | id | section      | contents                                              |
//! |----|--------------|-------------------------------------------------------|
//! | 1  | metadata     | fixed 48-byte record, see [`METADATA_LEN`]            |
//! | 2  | key index    | `key_count × u64` offsets into the key heap, sorted   |
//! | 3  | key heap     | `u32 len + UTF-8 bytes` per key                       |
//! | 4  | vectors      | `key_count × dimension` codes of `byte_width` bytes   |
//! | 5  | n-gram index | sorted `{ heap: u64, postings: u64, count: u32, flags: u32 }` |
//! | 6  | n-gram heap  | `u16 len + UTF-8 bytes` per n-gram                    |
//! | 7  | postings     | delta-encoded LEB128 ordinals                         |
//! | 8  | ann          | `"MVAN" | 0u32 | raw_len: u64 | raw_xxh64: u64` + LZ4 frame |
//!
//! Sections 5–7 exist from the medium tier up and section 8 only in heavy
//! stores. The file is never modified after the writer renames it into place.

mod reader;
mod writer;

pub use reader::{ReaderOptions, StoreReader};
pub use writer::{write_store, AnnParams, StoreOptions, WriteSummary};

use crate::error::{Error, Result};

pub const MAGIC: [u8; 4] = *b"MVST";
pub const FORMAT_VERSION: u16 = 1;
pub const HEADER_LEN: usize = 8;
pub const SECTION_ENTRY_LEN: usize = 32;
pub const METADATA_LEN: usize = 48;
pub const NGRAM_ENTRY_LEN: usize = 24;
pub const ANN_MAGIC: [u8; 4] = *b"MVAN";
pub const ANN_HEADER_LEN: usize = 24;

/// Bit set in an n-gram entry's flags when its postings were dropped for
/// exceeding the frequency cap.
pub const NGRAM_OMITTED: u32 = 1;

/// Default frequency cap: n-grams in more than 10% of keys (and more than
/// the floor) get no postings.
pub const NGRAM_CAP_PERMILLE: u32 = 100;
pub const NGRAM_CAP_FLOOR: u32 = 256;

/// Ordinal of a key: its position in byte-sorted key order.
pub type Ordinal = u32;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u32)]
pub enum SectionId {
    Metadata = 1,
    KeyIndex = 2,
    KeyHeap = 3,
    Vectors = 4,
    NgramIndex = 5,
    NgramHeap = 6,
    Postings = 7,
    Ann = 8,
}

impl SectionId {
    pub fn from_u32(v: u32) -> Option<Self> {
        use SectionId::*;
        Some(match v {
            1 => Metadata,
            2 => KeyIndex,
            3 => KeyHeap,
            4 => Vectors,
            5 => NgramIndex,
            6 => NgramHeap,
            7 => Postings,
            8 => Ann,
            _ => return None,
        })
    }

    pub fn name(self) -> &'static str {
        use SectionId::*;
        match self {
            Metadata => "metadata",
            KeyIndex => "key index",
            KeyHeap => "key heap",
            Vectors => "vectors",
            NgramIndex => "n-gram index",
            NgramHeap => "n-gram heap",
            Postings => "postings",
            Ann => "ann",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SectionEntry {
    pub id: u32,
    pub flags: u32,
    pub offset: u64,
    pub length: u64,
    pub checksum: u64,
}

impl SectionEntry {
    pub(crate) fn encode(&self, out: &mut Vec<u8>) {
        out.extend_from_slice(&self.id.to_le_bytes());
        out.extend_from_slice(&self.flags.to_le_bytes());
        out.extend_from_slice(&self.offset.to_le_bytes());
        out.extend_from_slice(&self.length.to_le_bytes());
        out.extend_from_slice(&self.checksum.to_le_bytes());
    }

    pub(crate) fn decode(b: &[u8]) -> Self {
        Self {
            id: le_u32(b, 0),
            flags: le_u32(b, 4),
            offset: le_u64(b, 8),
            length: le_u64(b, 16),
            checksum: le_u64(b, 24),
        }
    }

    pub fn end(&self) -> u64 {
        self.offset.saturating_add(self.length)
    }
}

#[inline]
pub(crate) fn le_u16(b: &[u8], at: usize) -> u16 {
    u16::from_le_bytes([b[at], b[at + 1]])
}

#[inline]
pub(crate) fn le_u32(b: &[u8], at: usize) -> u32 {
    u32::from_le_bytes(b[at..at + 4].try_into().expect("4 bytes"))
}

#[inline]
pub(crate) fn le_u64(b: &[u8], at: usize) -> u64 {
    u64::from_le_bytes(b[at..at + 8].try_into().expect("8 bytes"))
}

pub(crate) fn write_varint(mut v: u64, out: &mut Vec<u8>) {
    while v >= 0x80 {
        out.push((v as u8) | 0x80);
        v >>= 7;
    }
    out.push(v as u8);
}

/// Decodes one LEB128 value starting at `*pos`, advancing it.
pub(crate) fn read_varint(b: &[u8], pos: &mut usize) -> Result<u64> {
    let mut v = 0u64;
    let mut shift = 0;
    loop {
        let Some(&byte) = b.get(*pos) else {
            return Err(Error::CorruptSection {
                section: "varint",
                offset: *pos as u64,
                reason: "varint runs past end of section".into(),
            });
        };
        *pos += 1;
        if shift >= 64 {
            return Err(Error::CorruptSection {
                section: "varint",
                offset: *pos as u64,
                reason: "varint longer than 10 bytes".into(),
            });
        }
        v |= ((byte & 0x7f) as u64) << shift;
        if byte & 0x80 == 0 {
            return Ok(v);
        }
        shift += 7;
    }
}

/// Appends an ascending ordinal list as first value + gaps.
pub(crate) fn write_delta_list(ordinals: &[Ordinal], out: &mut Vec<u8>) {
    let mut prev = 0u32;
    for (i, &o) in ordinals.iter().enumerate() {
        debug_assert!(i == 0 || o > prev);
        write_varint((o - if i == 0 { 0 } else { prev }) as u64, out);
        prev = o;
    }
}

pub(crate) fn read_delta_list(b: &[u8], pos: &mut usize, count: usize) -> Result<Vec<Ordinal>> {
    let mut out = Vec::with_capacity(count);
    let mut prev = 0u64;
    for i in 0..count {
        let gap = read_varint(b, pos)?;
        let v = if i == 0 { gap } else { prev + gap };
        if v > Ordinal::MAX as u64 {
            return Err(Error::CorruptSection {
                section: "postings",
                offset: *pos as u64,
                reason: format!("ordinal {v} overflows"),
            });
        }
        out.push(v as Ordinal);
        prev = v;
    }
    Ok(out)
}
