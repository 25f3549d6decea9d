#![allow(dead_code)]

use std::path::{Path, PathBuf};

use vecstore::{write_store, EmbeddingVector, ParsedRecord, StoreOptions, StoreReader, Tier};

pub fn record(key: &str, v: &[f32]) -> vecstore::Result<ParsedRecord> {
    Ok(ParsedRecord {
        key: key.to_owned(),
        vector: EmbeddingVector::new(v.to_vec())?,
    })
}

pub fn build(
    dir: &Path,
    name: &str,
    keys: &[String],
    vectors: &[Vec<f32>],
    opts: &StoreOptions,
) -> (PathBuf, StoreReader) {
    let path = dir.join(name);
    write_store(
        &path,
        keys.iter().zip(vectors).map(|(k, v)| record(k, v)),
        opts,
    )
    .expect("write store");
    let r = StoreReader::open(&path).expect("open store");
    (path, r)
}

pub fn opts(tier: Tier, precision: u32) -> StoreOptions {
    StoreOptions {
        precision,
        ..StoreOptions::with_tier(tier)
    }
}

/// Independent f64 normalization of an `f32` input.
pub fn normalize_oracle(v: &[f32]) -> Vec<f64> {
    let n: f64 = v.iter().map(|&x| (x as f64).powi(2)).sum::<f64>().sqrt();
    v.iter().map(|&x| x as f64 / n).collect()
}

/// Naive cosine in f64, in index order, clamped, rounded to f32.
pub fn naive_cosine(a: &[f32], b: &[f32]) -> f32 {
    let mut dot = 0.0f64;
    let mut na = 0.0f64;
    let mut nb = 0.0f64;
    for i in 0..a.len() {
        dot += a[i] as f64 * b[i] as f64;
        na += a[i] as f64 * a[i] as f64;
        nb += b[i] as f64 * b[i] as f64;
    }
    let d = na.sqrt() * nb.sqrt();
    if d == 0.0 {
        return 0.0;
    }
    let c = (dot / d).clamp(-1.0, 1.0) as f32;
    if c == 0.0 {
        0.0
    } else {
        c
    }
}

/// Every (key, similarity) pair of a store against `q`, ranked by a plain
/// sort: similarity descending, key bytes ascending.
pub fn naive_ranking(r: &StoreReader, q: &[f32]) -> Vec<(String, f32)> {
    let mut all: Vec<(String, f32)> = (0..r.key_count() as u32)
        .map(|o| {
            let v = r.read_vector(o).unwrap();
            (r.key(o).unwrap().to_owned(), naive_cosine(&v, q))
        })
        .collect();
    all.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.as_bytes().cmp(b.0.as_bytes())));
    all
}
