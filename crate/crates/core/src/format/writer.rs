use std::collections::{BTreeMap, HashMap};
use std::io::{BufWriter, Seek, SeekFrom, Write};
use std::path::Path;

use log::warn;
use xxhash_rust::xxh64::Xxh64;

use super::{
    write_delta_list, SectionEntry, SectionId, ANN_HEADER_LEN, ANN_MAGIC,
    FORMAT_VERSION, HEADER_LEN, MAGIC, METADATA_LEN, NGRAM_CAP_FLOOR, NGRAM_CAP_PERMILLE,
    NGRAM_OMITTED, SECTION_ENTRY_LEN,
};
use crate::error::{Error, Result};
use crate::hashing::checksum64;
use crate::ingest::ParsedRecord;
use crate::meta::{validate_ngram_range, Tier, DEFAULT_NGRAM_MAX, DEFAULT_NGRAM_MIN, HASH_XXH32};
use crate::oov::{char_ngrams_with, shrink_repeats, BOW, EOW};
use crate::quantize::{QuantizationSpec, DEFAULT_PRECISION};
use crate::search::forest::{build_forest, RowSource};
use crate::vector::normalize_f64;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AnnParams {
    pub n_trees: usize,
    pub leaf_cap: usize,
    pub seed: u64,
}

impl Default for AnnParams {
    fn default() -> Self {
        Self {
            n_trees: 16,
            leaf_cap: 64,
            seed: 42,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StoreOptions {
    pub tier: Tier,
    pub precision: u32,
    pub ngram_min: usize,
    pub ngram_max: usize,
    pub ann: AnnParams,
}

impl Default for StoreOptions {
    fn default() -> Self {
        Self {
            tier: Tier::Medium,
            precision: DEFAULT_PRECISION,
            ngram_min: DEFAULT_NGRAM_MIN,
            ngram_max: DEFAULT_NGRAM_MAX,
            ann: AnnParams::default(),
        }
    }
}

impl StoreOptions {
    pub fn with_tier(tier: Tier) -> Self {
        Self {
            tier,
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WriteSummary {
    pub keys_written: u64,
    pub dimension: usize,
    pub tier: Tier,
    pub precision: u32,
    pub byte_width: usize,
    /// Records whose key had already been seen (the later record wins).
    pub duplicates_replaced: u64,
    pub zero_vectors_dropped: u64,
    pub ngrams_indexed: u64,
    pub ngrams_omitted: u64,
    pub file_size: u64,
}

/// Collected records: keys in arrival order and their quantized rows.
struct Staging {
    quant: QuantizationSpec,
    dimension: usize,
    keys: Vec<String>,
    slots: HashMap<String, usize>,
    rows: Vec<u8>,
    duplicates: u64,
    dropped: u64,
}

impl Staging {
    fn row_len(&self) -> usize {
        self.dimension * self.quant.byte_width()
    }

    fn push(&mut self, record: ParsedRecord, index: u64) -> Result<()> {
        if self.dimension == 0 {
            self.dimension = record.vector.dimension();
        } else if record.vector.dimension() != self.dimension {
            return Err(Error::DimensionDrift {
                record: index,
                expected: self.dimension,
                actual: record.vector.dimension(),
            });
        }
        if record.key.is_empty() {
            return Err(Error::MalformedRecord {
                record: index,
                location: "input".into(),
                reason: "empty key".into(),
            });
        }
        let raw: Vec<f64> = record.vector.iter().map(|&c| c as f64).collect();
        let unit = match normalize_f64(&raw) {
            Ok(u) => u,
            Err(_) => {
                self.dropped += 1;
                return Ok(());
            }
        };
        let codes = self.quant.quantize_f64(&unit)?;
        let mut encoded = Vec::with_capacity(self.row_len());
        self.quant.encode_codes(&codes, &mut encoded);
        match self.slots.get(&record.key) {
            Some(&slot) => {
                let len = self.row_len();
                self.rows[slot * len..(slot + 1) * len].copy_from_slice(&encoded);
                self.duplicates += 1;
            }
            None => {
                if self.keys.len() >= u32::MAX as usize {
                    return Err(Error::InvalidArgument("more than 2^32 - 1 keys".into()));
                }
                self.slots.insert(record.key.clone(), self.keys.len());
                self.keys.push(record.key);
                self.rows.extend_from_slice(&encoded);
            }
        }
        Ok(())
    }
}

/// Rows of the staging buffer in sorted-key order.
struct SortedRows<'a> {
    staging: &'a Staging,
    order: &'a [usize],
}

impl RowSource for SortedRows<'_> {
    fn len(&self) -> usize {
        self.order.len()
    }

    fn dimension(&self) -> usize {
        self.staging.dimension
    }

    fn row_into(&self, index: usize, out: &mut [f32]) {
        let len = self.staging.row_len();
        let slot = self.order[index];
        self.staging
            .quant
            .decode_row(&self.staging.rows[slot * len..(slot + 1) * len], out);
    }
}

/// Streams sections to disk, tracking offsets and checksums.
struct SectionSink<W> {
    out: W,
    pos: u64,
    entries: Vec<SectionEntry>,
    current: Option<(SectionId, u64, Xxh64)>,
}

impl<W: Write> SectionSink<W> {
    fn begin(&mut self, id: SectionId) -> Result<()> {
        debug_assert!(self.current.is_none());
        let pad = (8 - (self.pos % 8)) % 8;
        self.out.write_all(&[0u8; 8][..pad as usize])?;
        self.pos += pad;
        self.current = Some((id, self.pos, Xxh64::new(0)));
        Ok(())
    }

    fn write(&mut self, bytes: &[u8]) -> Result<()> {
        let (_, _, hasher) = self.current.as_mut().expect("section open");
        hasher.update(bytes);
        self.out.write_all(bytes)?;
        self.pos += bytes.len() as u64;
        Ok(())
    }

    fn end(&mut self) {
        let (id, offset, hasher) = self.current.take().expect("section open");
        self.entries.push(SectionEntry {
            id: id as u32,
            flags: 0,
            offset,
            length: self.pos - offset,
            checksum: hasher.digest(),
        });
    }

    fn section(&mut self, id: SectionId, bytes: &[u8]) -> Result<()> {
        self.begin(id)?;
        self.write(bytes)?;
        self.end();
        Ok(())
    }
}

struct NgramIndex {
    /// n-gram → ascending ordinals (empty when omitted).
    postings: BTreeMap<String, Vec<u32>>,
    omitted: u64,
}

fn build_ngram_index(sorted_keys: &[&str], min: usize, max: usize) -> Result<NgramIndex> {
    let mut postings: BTreeMap<String, Vec<u32>> = BTreeMap::new();
    for (ordinal, key) in sorted_keys.iter().enumerate() {
        let shrunk = shrink_repeats(key);
        if shrunk.trim().is_empty() {
            continue;
        }
        for g in char_ngrams_with(&shrunk, min, max, BOW, EOW)? {
            postings.entry(g).or_default().push(ordinal as u32);
        }
    }
    let n = sorted_keys.len() as u64;
    let cap = (n * NGRAM_CAP_PERMILLE as u64).div_ceil(1000).max(NGRAM_CAP_FLOOR as u64);
    let mut omitted = 0;
    for list in postings.values_mut() {
        if list.len() as u64 > cap {
            list.clear();
            omitted += 1;
        }
    }
    Ok(NgramIndex { postings, omitted })
}

fn encode_metadata(
    dimension: usize,
    key_count: u64,
    opts: &StoreOptions,
    quant: QuantizationSpec,
    omitted: u64,
) -> Vec<u8> {
    let mut m = Vec::with_capacity(METADATA_LEN);
    m.extend_from_slice(&(dimension as u32).to_le_bytes());
    m.extend_from_slice(&0u32.to_le_bytes());
    m.extend_from_slice(&key_count.to_le_bytes());
    m.push(opts.tier.to_u8());
    m.push(quant.precision() as u8);
    m.push(quant.byte_width() as u8);
    m.push(opts.ngram_min as u8);
    m.push(opts.ngram_max as u8);
    m.push(HASH_XXH32);
    m.extend_from_slice(&0u16.to_le_bytes());
    m.extend_from_slice(&(BOW as u32).to_le_bytes());
    m.extend_from_slice(&(EOW as u32).to_le_bytes());
    m.extend_from_slice(&NGRAM_CAP_PERMILLE.to_le_bytes());
    m.extend_from_slice(&NGRAM_CAP_FLOOR.to_le_bytes());
    m.extend_from_slice(&omitted.to_le_bytes());
    debug_assert_eq!(m.len(), METADATA_LEN);
    m
}

/// Normalizes, quantizes and writes `records` to a new store at `path`.
///
/// Keys are sorted by their UTF-8 bytes, so ordinal order is key order. The
/// file is assembled beside `path` and renamed into place, so readers never
/// see a partial store. Output is byte-identical for identical inputs.
pub fn write_store<I>(path: impl AsRef<Path>, records: I, opts: &StoreOptions) -> Result<WriteSummary>
where
    I: IntoIterator<Item = Result<ParsedRecord>>,
{
    let path = path.as_ref();
    validate_ngram_range(opts.ngram_min, opts.ngram_max)?;
    if opts.tier.has_ann() && (opts.ann.n_trees == 0 || opts.ann.leaf_cap == 0) {
        return Err(Error::InvalidArgument("n_trees and leaf_cap must be >= 1".into()));
    }
    let quant = QuantizationSpec::new(opts.precision)?;

    let mut staging = Staging {
        quant,
        dimension: 0,
        keys: Vec::new(),
        slots: HashMap::new(),
        rows: Vec::new(),
        duplicates: 0,
        dropped: 0,
    };
    for (i, record) in records.into_iter().enumerate() {
        staging.push(record?, i as u64 + 1)?;
    }
    if staging.dropped > 0 {
        warn!("dropped {} zero vectors", staging.dropped);
    }
    if staging.duplicates > 0 {
        warn!("{} duplicate keys replaced by later records", staging.duplicates);
    }
    if staging.keys.is_empty() {
        return Err(Error::EmptyInput);
    }
    staging.slots = HashMap::new();

    let mut order: Vec<usize> = (0..staging.keys.len()).collect();
    order.sort_unstable_by(|&a, &b| staging.keys[a].as_bytes().cmp(staging.keys[b].as_bytes()));
    let sorted_keys: Vec<&str> = order.iter().map(|&i| staging.keys[i].as_str()).collect();
    let key_count = sorted_keys.len() as u64;

    let ngrams = if opts.tier.has_ngrams() {
        Some(build_ngram_index(&sorted_keys, opts.ngram_min, opts.ngram_max)?)
    } else {
        None
    };

    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let tmp = tempfile::NamedTempFile::new_in(dir)?;
    let section_count = 4 + if ngrams.is_some() { 3 } else { 0 } + usize::from(opts.tier.has_ann());
    let mut sink = SectionSink {
        out: BufWriter::with_capacity(1 << 20, tmp.as_file().try_clone()?),
        pos: 0,
        entries: Vec::with_capacity(section_count),
        current: None,
    };

    // Header and a placeholder table, patched once offsets are known.
    let mut header = Vec::with_capacity(HEADER_LEN);
    header.extend_from_slice(&MAGIC);
    header.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    header.extend_from_slice(&(section_count as u16).to_le_bytes());
    sink.out.write_all(&header)?;
    sink.out.write_all(&vec![0u8; section_count * SECTION_ENTRY_LEN])?;
    sink.pos = (HEADER_LEN + section_count * SECTION_ENTRY_LEN) as u64;

    let omitted = ngrams.as_ref().map_or(0, |n| n.omitted);
    sink.section(
        SectionId::Metadata,
        &encode_metadata(staging.dimension, key_count, opts, quant, omitted),
    )?;

    let mut index = Vec::with_capacity(sorted_keys.len() * 8);
    let mut heap = Vec::new();
    for key in &sorted_keys {
        index.extend_from_slice(&(heap.len() as u64).to_le_bytes());
        heap.extend_from_slice(&(key.len() as u32).to_le_bytes());
        heap.extend_from_slice(key.as_bytes());
    }
    sink.section(SectionId::KeyIndex, &index)?;
    sink.section(SectionId::KeyHeap, &heap)?;
    drop((index, heap));

    sink.begin(SectionId::Vectors)?;
    let row_len = staging.row_len();
    for &slot in &order {
        sink.write(&staging.rows[slot * row_len..(slot + 1) * row_len])?;
    }
    sink.end();

    let mut ngrams_indexed = 0;
    if let Some(ng) = &ngrams {
        let mut entries = Vec::with_capacity(ng.postings.len() * super::NGRAM_ENTRY_LEN);
        let mut gram_heap = Vec::new();
        let mut postings = Vec::new();
        for (gram, list) in &ng.postings {
            let flags = if list.is_empty() { NGRAM_OMITTED } else { 0 };
            entries.extend_from_slice(&(gram_heap.len() as u64).to_le_bytes());
            entries.extend_from_slice(&(postings.len() as u64).to_le_bytes());
            entries.extend_from_slice(&(list.len() as u32).to_le_bytes());
            entries.extend_from_slice(&flags.to_le_bytes());
            gram_heap.extend_from_slice(&(gram.len() as u16).to_le_bytes());
            gram_heap.extend_from_slice(gram.as_bytes());
            write_delta_list(list, &mut postings);
        }
        ngrams_indexed = ng.postings.len() as u64;
        sink.section(SectionId::NgramIndex, &entries)?;
        sink.section(SectionId::NgramHeap, &gram_heap)?;
        sink.section(SectionId::Postings, &postings)?;
    }

    if opts.tier.has_ann() {
        let rows = SortedRows {
            staging: &staging,
            order: &order,
        };
        let forest = build_forest(&rows, opts.ann.n_trees, opts.ann.leaf_cap, opts.ann.seed, quant)?;
        let raw = forest.to_bytes();
        let mut compressed = Vec::with_capacity(ANN_HEADER_LEN + raw.len() / 2);
        compressed.extend_from_slice(&ANN_MAGIC);
        compressed.extend_from_slice(&0u32.to_le_bytes());
        compressed.extend_from_slice(&(raw.len() as u64).to_le_bytes());
        compressed.extend_from_slice(&checksum64(&raw).to_le_bytes());
        let mut enc = lz4_flex::frame::FrameEncoder::new(compressed);
        enc.write_all(&raw)?;
        let compressed = enc
            .finish()
            .map_err(|e| Error::Io(std::io::Error::other(e)))?;
        sink.section(SectionId::Ann, &compressed)?;
    }

    let SectionSink {
        out,
        pos: file_size,
        entries,
        ..
    } = sink;
    debug_assert_eq!(entries.len(), section_count);
    let mut out = out.into_inner().map_err(|e| e.into_error())?;
    let mut table = Vec::with_capacity(section_count * SECTION_ENTRY_LEN);
    for e in &entries {
        e.encode(&mut table);
    }
    out.seek(SeekFrom::Start(HEADER_LEN as u64))?;
    out.write_all(&table)?;
    out.sync_all()?;
    tmp.persist(path).map_err(|e| Error::Io(e.error))?;

    Ok(WriteSummary {
        keys_written: key_count,
        dimension: staging.dimension,
        tier: opts.tier,
        precision: quant.precision(),
        byte_width: quant.byte_width(),
        duplicates_replaced: staging.duplicates,
        zero_vectors_dropped: staging.dropped,
        ngrams_indexed,
        ngrams_omitted: omitted,
        file_size,
    })
}
