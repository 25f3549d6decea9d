use std::fs::File;
use std::io::Read;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use memmap2::Mmap;
use once_cell::sync::OnceCell;

use super::{
    le_u16, le_u32, le_u64, read_delta_list, Ordinal, SectionEntry, SectionId, ANN_HEADER_LEN,
    ANN_MAGIC, FORMAT_VERSION, HEADER_LEN, MAGIC, METADATA_LEN, NGRAM_ENTRY_LEN, NGRAM_OMITTED,
    SECTION_ENTRY_LEN,
};
use crate::error::{Error, Result};
use crate::hashing::checksum64;
use crate::meta::{StoreMetadata, Tier};
use crate::oov::{BOW, EOW};
use crate::quantize::QuantizationSpec;
use crate::search::forest::ProjectionForest;
use crate::vector::EmbeddingVector;

/// Default approximate-search budget multiplier.
pub const DEFAULT_ANN_BETA: f32 = 32.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReaderOptions {
    /// Candidates inspected per tree per requested neighbour at effort 1.0.
    pub ann_beta: f32,
}

impl Default for ReaderOptions {
    fn default() -> Self {
        Self {
            ann_beta: DEFAULT_ANN_BETA,
        }
    }
}

/// A located n-gram dictionary entry.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) struct NgramEntry {
    pub postings_offset: u64,
    pub count: u32,
    pub omitted: bool,
}

/// Read-only view of a store file.
///
/// Opening reads the header, section table and metadata (a few hundred
/// bytes) and maps the file; keys, vectors and postings are paged in by the
/// OS as queries touch them. A reader is `Send + Sync`.
pub struct StoreReader {
    path: PathBuf,
    map: Mmap,
    meta: StoreMetadata,
    sections: Vec<SectionEntry>,
    options: ReaderOptions,
    open_bytes_read: u64,
    forest: OnceCell<Arc<ProjectionForest>>,
    ann_decompressions: AtomicU64,
}

impl std::fmt::Debug for StoreReader {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("StoreReader")
            .field("path", &self.path)
            .field("meta", &self.meta)
            .finish_non_exhaustive()
    }
}

/// Counts bytes pulled through `read` during open.
struct CountingFile {
    file: File,
    read: u64,
    len: u64,
}

impl CountingFile {
    fn read_at(&mut self, offset: u64, len: usize) -> Result<Vec<u8>> {
        let end = offset + len as u64;
        if end > self.len {
            return Err(Error::TruncatedFile {
                offset,
                end,
                file_len: self.len,
            });
        }
        use std::io::{Seek, SeekFrom};
        self.file.seek(SeekFrom::Start(offset))?;
        let mut buf = vec![0u8; len];
        self.file.read_exact(&mut buf)?;
        self.read += len as u64;
        Ok(buf)
    }
}

fn corrupt(section: SectionId, offset: u64, reason: impl Into<String>) -> Error {
    Error::CorruptSection {
        section: section.name(),
        offset,
        reason: reason.into(),
    }
}

impl StoreReader {
    pub fn open(path: impl AsRef<Path>) -> Result<Self> {
        Self::open_with(path, ReaderOptions::default())
    }

    pub fn open_with(path: impl AsRef<Path>, options: ReaderOptions) -> Result<Self> {
        let path = path.as_ref();
        let file = File::open(path)?;
        let len = file.metadata()?.len();
        let mut f = CountingFile { file, read: 0, len };

        let header = f.read_at(0, HEADER_LEN).map_err(|e| match e {
            Error::TruncatedFile { .. } if len >= 4 => e,
            Error::TruncatedFile { .. } => Error::TruncatedFile {
                offset: 0,
                end: HEADER_LEN as u64,
                file_len: len,
            },
            other => other,
        })?;
        let magic: [u8; 4] = header[..4].try_into().expect("4 bytes");
        if magic != MAGIC {
            return Err(Error::BadMagic { found: magic });
        }
        let version = le_u16(&header, 4);
        if version != FORMAT_VERSION {
            return Err(Error::UnsupportedVersion {
                found: version,
                supported: FORMAT_VERSION,
            });
        }
        let count = le_u16(&header, 6) as usize;
        let table = f.read_at(HEADER_LEN as u64, count * SECTION_ENTRY_LEN)?;
        let sections: Vec<SectionEntry> = table
            .chunks_exact(SECTION_ENTRY_LEN)
            .map(SectionEntry::decode)
            .collect();
        for s in &sections {
            if s.end() > len {
                return Err(Error::TruncatedFile {
                    offset: s.offset,
                    end: s.end(),
                    file_len: len,
                });
            }
        }

        let meta_entry = find(&sections, SectionId::Metadata)
            .ok_or_else(|| corrupt(SectionId::Metadata, HEADER_LEN as u64, "missing"))?;
        if meta_entry.length as usize != METADATA_LEN {
            return Err(corrupt(
                SectionId::Metadata,
                meta_entry.offset,
                format!("length {} != {METADATA_LEN}", meta_entry.length),
            ));
        }
        let raw_meta = f.read_at(meta_entry.offset, METADATA_LEN)?;
        if checksum64(&raw_meta) != meta_entry.checksum {
            return Err(corrupt(SectionId::Metadata, meta_entry.offset, "checksum mismatch"));
        }
        let meta = decode_metadata(&raw_meta, version, meta_entry.offset)?;
        check_layout(&sections, &meta)?;

        // SAFETY: store files are immutable once written; the writer only
        // ever renames a complete file into place.
        let map = unsafe { Mmap::map(&f.file)? };

        Ok(Self {
            path: path.to_owned(),
            map,
            meta,
            sections,
            options,
            open_bytes_read: f.read,
            forest: OnceCell::new(),
            ann_decompressions: AtomicU64::new(0),
        })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn metadata(&self) -> &StoreMetadata {
        &self.meta
    }

    pub fn key_count(&self) -> u64 {
        self.meta.key_count
    }

    pub fn dimension(&self) -> usize {
        self.meta.dimension
    }

    pub fn tier(&self) -> Tier {
        self.meta.tier
    }

    pub fn quantization(&self) -> QuantizationSpec {
        self.meta.quantization
    }

    pub fn options(&self) -> ReaderOptions {
        self.options
    }

    pub fn ann_beta(&self) -> f32 {
        self.options.ann_beta
    }

    /// Bytes read with explicit I/O while opening (mapping itself reads
    /// nothing).
    pub fn open_bytes_read(&self) -> u64 {
        self.open_bytes_read
    }

    pub fn sections(&self) -> &[SectionEntry] {
        &self.sections
    }

    fn section(&self, id: SectionId) -> &[u8] {
        match find(&self.sections, id) {
            Some(s) => &self.map[s.offset as usize..s.end() as usize],
            None => &[],
        }
    }

    fn check_ordinal(&self, ordinal: Ordinal) -> Result<()> {
        if (ordinal as u64) < self.meta.key_count {
            Ok(())
        } else {
            Err(Error::OrdinalOutOfRange {
                ordinal: ordinal as u64,
                key_count: self.meta.key_count,
            })
        }
    }

    /// Key stored at `ordinal`.
    pub fn key(&self, ordinal: Ordinal) -> Result<&str> {
        self.check_ordinal(ordinal)?;
        let index = self.section(SectionId::KeyIndex);
        let heap = self.section(SectionId::KeyHeap);
        let at = le_u64(index, ordinal as usize * 8) as usize;
        let bytes = heap
            .get(at..at + 4)
            .map(|b| le_u32(b, 0) as usize)
            .and_then(|len| heap.get(at + 4..at + 4 + len))
            .ok_or_else(|| corrupt(SectionId::KeyHeap, at as u64, "key runs past heap"))?;
        std::str::from_utf8(bytes)
            .map_err(|_| corrupt(SectionId::KeyHeap, at as u64, "key is not UTF-8"))
    }

    /// Keys in ordinal (byte-sorted) order.
    pub fn keys(&self) -> impl Iterator<Item = Result<&str>> + '_ {
        (0..self.meta.key_count as Ordinal).map(move |o| self.key(o))
    }

    /// Exact, case-sensitive lookup by binary search over the sorted keys.
    pub fn lookup_key(&self, key: &str) -> Option<Ordinal> {
        let (mut lo, mut hi) = (0u64, self.meta.key_count);
        let needle = key.as_bytes();
        while lo < hi {
            let mid = lo + (hi - lo) / 2;
            let probe = self.key(mid as Ordinal).ok()?;
            match probe.as_bytes().cmp(needle) {
                std::cmp::Ordering::Less => lo = mid + 1,
                std::cmp::Ordering::Greater => hi = mid,
                std::cmp::Ordering::Equal => return Some(mid as Ordinal),
            }
        }
        None
    }

    pub fn contains(&self, key: &str) -> bool {
        self.lookup_key(key).is_some()
    }

    /// Raw quantized row.
    pub(crate) fn raw_row(&self, ordinal: Ordinal) -> &[u8] {
        let len = self.meta.dimension * self.meta.quantization.byte_width();
        let at = ordinal as usize * len;
        &self.section(SectionId::Vectors)[at..at + len]
    }

    /// All rows back to back, for scans.
    pub(crate) fn vector_block(&self) -> &[u8] {
        self.section(SectionId::Vectors)
    }

    /// Dequantizes a row into `out` (`out.len() == dimension`).
    pub fn row_into(&self, ordinal: Ordinal, out: &mut [f32]) -> Result<()> {
        self.check_ordinal(ordinal)?;
        if out.len() != self.meta.dimension {
            return Err(Error::DimensionMismatch {
                expected: self.meta.dimension,
                actual: out.len(),
            });
        }
        self.meta.quantization.decode_row(self.raw_row(ordinal), out);
        Ok(())
    }

    /// Like [`row_into`](Self::row_into) but without the final rounding to
    /// `f32`, which at precision 7 and above is coarser than the stored
    /// step.
    pub fn row_into_f64(&self, ordinal: Ordinal, out: &mut [f64]) -> Result<()> {
        self.check_ordinal(ordinal)?;
        if out.len() != self.meta.dimension {
            return Err(Error::DimensionMismatch {
                expected: self.meta.dimension,
                actual: out.len(),
            });
        }
        self.meta.quantization.decode_row_f64(self.raw_row(ordinal), out);
        Ok(())
    }

    pub fn read_vector(&self, ordinal: Ordinal) -> Result<EmbeddingVector> {
        let mut out = vec![0.0f32; self.meta.dimension];
        self.row_into(ordinal, &mut out)?;
        Ok(EmbeddingVector::from_raw(out))
    }

    /// Vector for an in-vocabulary key.
    pub fn vector(&self, key: &str) -> Option<EmbeddingVector> {
        self.lookup_key(key).and_then(|o| self.read_vector(o).ok())
    }

    fn require(&self, operation: &'static str, ok: bool) -> Result<()> {
        if ok {
            Ok(())
        } else {
            Err(Error::TierUnsupported {
                operation,
                tier: self.meta.tier,
            })
        }
    }

    pub(crate) fn ngram_entry(&self, ngram: &str) -> Result<Option<NgramEntry>> {
        self.require("n-gram lookup", self.meta.tier.has_ngrams())?;
        let index = self.section(SectionId::NgramIndex);
        let heap = self.section(SectionId::NgramHeap);
        let n = index.len() / NGRAM_ENTRY_LEN;
        let needle = ngram.as_bytes();
        let (mut lo, mut hi) = (0usize, n);
        while lo < hi {
            let mid = lo + (hi - lo) / 2;
            let e = &index[mid * NGRAM_ENTRY_LEN..(mid + 1) * NGRAM_ENTRY_LEN];
            let at = le_u64(e, 0) as usize;
            let probe = heap
                .get(at..at + 2)
                .map(|b| le_u16(b, 0) as usize)
                .and_then(|len| heap.get(at + 2..at + 2 + len))
                .ok_or_else(|| corrupt(SectionId::NgramHeap, at as u64, "n-gram runs past heap"))?;
            match probe.cmp(needle) {
                std::cmp::Ordering::Less => lo = mid + 1,
                std::cmp::Ordering::Greater => hi = mid,
                std::cmp::Ordering::Equal => {
                    return Ok(Some(NgramEntry {
                        postings_offset: le_u64(e, 8),
                        count: le_u32(e, 16),
                        omitted: le_u32(e, 20) & NGRAM_OMITTED != 0,
                    }))
                }
            }
        }
        Ok(None)
    }

    pub(crate) fn entry_postings(&self, entry: &NgramEntry) -> Result<Vec<Ordinal>> {
        let postings = self.section(SectionId::Postings);
        let mut pos = entry.postings_offset as usize;
        read_delta_list(postings, &mut pos, entry.count as usize)
    }

    /// Ascending ordinals of keys whose padded n-gram set contains `ngram`.
    ///
    /// N-grams that occur in too many keys have no postings and report
    /// [`Error::NgramOmitted`].
    pub fn ngram_postings(&self, ngram: &str) -> Result<Vec<Ordinal>> {
        match self.ngram_entry(ngram)? {
            None => Ok(Vec::new()),
            Some(e) if e.omitted => Err(Error::NgramOmitted(ngram.to_owned())),
            Some(e) => self.entry_postings(&e),
        }
    }

    /// The approximate-search forest, decompressed on first use and cached.
    pub fn load_ann(&self) -> Result<Arc<ProjectionForest>> {
        self.require("approximate search", self.meta.tier.has_ann())?;
        self.forest
            .get_or_try_init(|| {
                self.ann_decompressions.fetch_add(1, Ordering::Relaxed);
                self.decode_ann().map(Arc::new)
            })
            .cloned()
    }

    /// How many times the ANN section has been decompressed.
    pub fn ann_decompressions(&self) -> u64 {
        self.ann_decompressions.load(Ordering::Relaxed)
    }

    fn decode_ann(&self) -> Result<ProjectionForest> {
        let raw = self.decompress_ann()?;
        let forest = ProjectionForest::from_bytes(&raw)?;
        if forest.vector_count() as u64 != self.meta.key_count || forest.dimension() != self.meta.dimension {
            return Err(corrupt(
                SectionId::Ann,
                0,
                "forest does not match store dimensions",
            ));
        }
        Ok(forest)
    }

    /// Decompressed ANN payload, verified against the checksum recorded at
    /// write time.
    pub fn decompress_ann(&self) -> Result<Vec<u8>> {
        self.require("approximate search", self.meta.tier.has_ann())?;
        let section = self.section(SectionId::Ann);
        let offset = find(&self.sections, SectionId::Ann).map_or(0, |s| s.offset);
        if section.len() < ANN_HEADER_LEN || section[..4] != ANN_MAGIC {
            return Err(corrupt(SectionId::Ann, offset, "bad ANN header"));
        }
        let raw_len = le_u64(section, 8) as usize;
        let expected = le_u64(section, 16);
        let mut raw = Vec::with_capacity(raw_len);
        lz4_flex::frame::FrameDecoder::new(&section[ANN_HEADER_LEN..])
            .read_to_end(&mut raw)
            .map_err(|e| corrupt(SectionId::Ann, offset, format!("LZ4 frame: {e}")))?;
        let actual = checksum64(&raw);
        if raw.len() != raw_len || actual != expected {
            return Err(Error::CorruptAnnSection { expected, actual });
        }
        Ok(raw)
    }

    /// Checks every section checksum. Reads the whole file.
    pub fn verify(&self) -> Result<()> {
        for s in &self.sections {
            let bytes = &self.map[s.offset as usize..s.end() as usize];
            if checksum64(bytes) != s.checksum {
                let id = SectionId::from_u32(s.id);
                return Err(Error::CorruptSection {
                    section: id.map_or("unknown", SectionId::name),
                    offset: s.offset,
                    reason: "checksum mismatch".into(),
                });
            }
        }
        Ok(())
    }
}

fn find(sections: &[SectionEntry], id: SectionId) -> Option<&SectionEntry> {
    sections.iter().find(|s| s.id == id as u32)
}

fn decode_metadata(b: &[u8], version: u16, offset: u64) -> Result<StoreMetadata> {
    let bad = |reason: String| corrupt(SectionId::Metadata, offset, reason);
    let tier = Tier::from_u8(b[16]).ok_or_else(|| bad(format!("unknown tier {}", b[16])))?;
    let quantization = QuantizationSpec::new(b[17] as u32)?;
    if quantization.byte_width() != b[18] as usize {
        return Err(bad(format!(
            "byte width {} does not match precision {}",
            b[18], b[17]
        )));
    }
    if le_u32(b, 24) != BOW as u32 || le_u32(b, 28) != EOW as u32 {
        return Err(bad("unexpected n-gram sentinels".into()));
    }
    let meta = StoreMetadata {
        dimension: le_u32(b, 0) as usize,
        key_count: le_u64(b, 8),
        tier,
        quantization,
        ngram_min: b[19] as usize,
        ngram_max: b[20] as usize,
        hash_algorithm_id: b[21],
        format_version: version,
        ngram_cap_fraction: le_u32(b, 32) as f64 / 1000.0,
        ngram_cap_floor: le_u32(b, 36) as u64,
        ngrams_omitted: le_u64(b, 40),
    };
    meta.validate().map_err(|e| bad(e.to_string()))?;
    if meta.key_count > Ordinal::MAX as u64 {
        return Err(bad(format!("key count {} too large", meta.key_count)));
    }
    Ok(meta)
}

/// Checks section presence and sizes against the metadata, without reading
/// section contents.
fn check_layout(sections: &[SectionEntry], meta: &StoreMetadata) -> Result<()> {
    let need = |id: SectionId| {
        find(sections, id).ok_or_else(|| corrupt(id, 0, format!("missing from {} store", meta.tier)))
    };
    let n = meta.key_count;
    let index = need(SectionId::KeyIndex)?;
    if index.length != n * 8 {
        return Err(corrupt(
            SectionId::KeyIndex,
            index.offset,
            format!("length {} != {} keys × 8", index.length, n),
        ));
    }
    need(SectionId::KeyHeap)?;
    let vectors = need(SectionId::Vectors)?;
    let row = (meta.dimension * meta.quantization.byte_width()) as u64;
    if vectors.length != n * row {
        return Err(corrupt(
            SectionId::Vectors,
            vectors.offset,
            format!("length {} != {} rows × {} bytes", vectors.length, n, row),
        ));
    }
    if meta.tier.has_ngrams() {
        let idx = need(SectionId::NgramIndex)?;
        if idx.length % NGRAM_ENTRY_LEN as u64 != 0 {
            return Err(corrupt(SectionId::NgramIndex, idx.offset, "ragged entries"));
        }
        need(SectionId::NgramHeap)?;
        need(SectionId::Postings)?;
    }
    if meta.tier.has_ann() {
        need(SectionId::Ann)?;
    }
    Ok(())
}
