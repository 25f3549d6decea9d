mod common;

use std::collections::{BTreeMap, BTreeSet};
use std::fs;

use common::{build, normalize_oracle, opts, record};
use proptest::prelude::*;
use vecstore::format::{SectionId, HEADER_LEN};
use vecstore::oov::{char_ngrams, shrink_repeats};
use vecstore::synthetic::gaussian_unit_vectors;
use vecstore::{write_store, Error, StoreOptions, StoreReader, Tier};

fn keys(n: usize) -> Vec<String> {
    (0..n).map(|i| format!("k{}", (i * 7919) % 100_003)).collect()
}

fn raw_vectors(n: usize, d: usize, seed: u64) -> Vec<Vec<f32>> {
    // Unnormalized inputs with varied magnitudes.
    gaussian_unit_vectors(n, d, seed)
        .into_iter()
        .enumerate()
        .map(|(i, v)| v.into_iter().map(|x| x * (1.0 + (i % 5) as f32 * 3.0)).collect())
        .collect()
}

/// Half an f32 ulp at `x`: the most rounding the final cast can add.
fn half_ulp(x: f64) -> f64 {
    let f = x.abs() as f32;
    (f32::from_bits(f.to_bits() + 1) - f) as f64 / 2.0
}

fn assert_round_trip(d: usize, n: usize, precision: u32, seed: u64) {
    let dir = tempfile::tempdir().unwrap();
    let ks = keys(n);
    let vs = raw_vectors(n, d, seed);
    let (_, r) = build(dir.path(), "s.vst", &ks, &vs, &opts(Tier::Light, precision));
    let tol = 0.5 * 10f64.powi(-(precision as i32));
    for (k, v) in ks.iter().zip(&vs) {
        let o = r.lookup_key(k).unwrap();
        let got = r.read_vector(o).unwrap();
        let want = normalize_oracle(v);
        for (i, (&g, &w)) in got.iter().zip(&want).enumerate() {
            let err = (g as f64 - w).abs();
            assert!(
                err <= tol + half_ulp(w) + 1e-15,
                "key {k} component {i}: got {g}, want {w}, p={precision}"
            );
        }
    }
}

#[test]
fn round_trip_within_half_step() {
    for p in [0, 1, 2, 3, 4, 5, 7, 9, 12] {
        assert_round_trip(13, 200, p, p as u64);
    }
    assert_round_trip(300, 50, 7, 99);
}

#[test]
fn metadata_and_widths() {
    let dir = tempfile::tempdir().unwrap();
    for (p, w) in [(0, 1), (2, 1), (3, 2), (4, 2), (5, 4), (9, 4), (10, 8), (18, 8)] {
        let (_, r) = build(
            dir.path(),
            &format!("p{p}.vst"),
            &keys(5),
            &raw_vectors(5, 4, 1),
            &opts(Tier::Medium, p),
        );
        let m = r.metadata();
        assert_eq!(m.quantization.byte_width(), w, "p={p}");
        assert_eq!((m.dimension, m.key_count, m.tier), (4, 5, Tier::Medium));
        assert_eq!((m.ngram_min, m.ngram_max), (3, 6));
        assert_eq!(m.format_version, 1);
        let vec_section = r
            .sections()
            .iter()
            .find(|s| s.id == SectionId::Vectors as u32)
            .unwrap();
        assert_eq!(vec_section.length, 5 * 4 * w as u64);
        assert!(r.sections().iter().all(|s| s.offset % 8 == 0));
    }
}

#[test]
fn keys_sorted_and_binary_searchable() {
    let dir = tempfile::tempdir().unwrap();
    let mut ks = keys(500);
    ks.extend(["Zebra", "apple", "Äpfel", "über", "日本", "a b", "a"].map(String::from));
    let vs = raw_vectors(ks.len(), 3, 5);
    let (_, r) = build(dir.path(), "k.vst", &ks, &vs, &opts(Tier::Light, 4));

    let oracle: BTreeMap<Vec<u8>, ()> = ks.iter().map(|k| (k.as_bytes().to_vec(), ())).collect();
    let stored: Vec<String> = r.keys().map(|k| k.unwrap().to_owned()).collect();
    let expected: Vec<String> = oracle
        .keys()
        .map(|k| String::from_utf8(k.clone()).unwrap())
        .collect();
    assert_eq!(stored, expected);
    for (i, k) in expected.iter().enumerate() {
        assert_eq!(r.lookup_key(k), Some(i as u32));
    }
    for absent in ["", "k", "zzz", "apple ", "APPLE", "日"] {
        assert_eq!(r.lookup_key(absent), None, "{absent:?}");
    }
    assert!(matches!(
        r.key(r.key_count() as u32),
        Err(Error::OrdinalOutOfRange { .. })
    ));
}

#[test]
fn duplicates_last_wins_and_zero_vectors_dropped() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("d.vst");
    let records = vec![
        record("a", &[1.0, 0.0]),
        record("b", &[0.0, 0.0]),
        record("a", &[0.0, 2.0]),
        record("c", &[3.0, 4.0]),
    ];
    let s = write_store(&path, records, &StoreOptions::with_tier(Tier::Light)).unwrap();
    assert_eq!((s.keys_written, s.duplicates_replaced, s.zero_vectors_dropped), (2, 1, 1));
    let r = StoreReader::open(&path).unwrap();
    assert_eq!(r.vector("a").unwrap().as_slice(), &[0.0, 1.0]);
    assert_eq!(r.vector("c").unwrap().as_slice(), &[0.6, 0.8]);
    assert!(r.vector("b").is_none());

    let only_zero = vec![record("z", &[0.0, 0.0])];
    assert!(matches!(
        write_store(dir.path().join("z.vst"), only_zero, &StoreOptions::default()),
        Err(Error::EmptyInput)
    ));
    let drift = vec![record("a", &[1.0, 0.0]), record("b", &[1.0])];
    assert!(matches!(
        write_store(dir.path().join("x.vst"), drift, &StoreOptions::default()),
        Err(Error::DimensionDrift { record: 2, expected: 2, actual: 1 })
    ));
}

#[test]
fn identical_inputs_give_identical_files() {
    let dir = tempfile::tempdir().unwrap();
    let ks = keys(700);
    let vs = raw_vectors(700, 24, 3);
    let o = StoreOptions {
        ann: vecstore::AnnParams {
            n_trees: 4,
            leaf_cap: 16,
            seed: 42,
        },
        ..opts(Tier::Heavy, 5)
    };
    let (a, _) = build(dir.path(), "a.vst", &ks, &vs, &o);
    // Insertion order must not matter either.
    let mut rev_k = ks.clone();
    let mut rev_v = vs.clone();
    rev_k.reverse();
    rev_v.reverse();
    let (b, _) = build(dir.path(), "b.vst", &rev_k, &rev_v, &o);
    assert_eq!(fs::read(a).unwrap(), fs::read(b).unwrap());
}

#[test]
fn tiers_gate_sections() {
    let dir = tempfile::tempdir().unwrap();
    let ks = keys(100);
    let vs = raw_vectors(100, 8, 2);
    let (_, light) = build(dir.path(), "l.vst", &ks, &vs, &opts(Tier::Light, 7));
    let (_, medium) = build(dir.path(), "m.vst", &ks, &vs, &opts(Tier::Medium, 7));
    let (_, heavy) = build(dir.path(), "h.vst", &ks, &vs, &opts(Tier::Heavy, 7));
    assert_eq!(light.sections().len(), 4);
    assert_eq!(medium.sections().len(), 7);
    assert_eq!(heavy.sections().len(), 8);
    assert!(matches!(
        light.ngram_postings("k12"),
        Err(Error::TierUnsupported { tier: Tier::Light, .. })
    ));
    assert!(medium.ngram_postings("k12").is_ok());
    assert!(matches!(
        medium.load_ann(),
        Err(Error::TierUnsupported { tier: Tier::Medium, .. })
    ));
    assert_eq!(heavy.ann_decompressions(), 0);
    let f1 = heavy.load_ann().unwrap();
    let f2 = heavy.load_ann().unwrap();
    assert!(std::sync::Arc::ptr_eq(&f1, &f2));
    assert_eq!(heavy.ann_decompressions(), 1);
    for s in [&light, &medium, &heavy] {
        s.verify().unwrap();
    }
}

/// Brute-force postings: every key whose shrunk padded n-grams include `g`.
fn postings_oracle(keys: &[String], lo: usize, hi: usize) -> BTreeMap<String, BTreeSet<u32>> {
    let mut sorted: Vec<&String> = keys.iter().collect();
    sorted.sort_by(|a, b| a.as_bytes().cmp(b.as_bytes()));
    sorted.dedup();
    let mut out: BTreeMap<String, BTreeSet<u32>> = BTreeMap::new();
    for (o, k) in sorted.iter().enumerate() {
        for g in char_ngrams(&shrink_repeats(k), lo, hi).unwrap() {
            out.entry(g).or_default().insert(o as u32);
        }
    }
    out
}

#[test]
fn ngram_postings_match_brute_force() {
    let dir = tempfile::tempdir().unwrap();
    let words = vecstore::synthetic::EnglishLikeVocabulary::generate(400, 4, 11);
    let o = StoreOptions {
        ngram_min: 2,
        ngram_max: 4,
        ..opts(Tier::Medium, 3)
    };
    let (_, r) = build(dir.path(), "n.vst", &words.words, &words.vectors, &o);
    let oracle = postings_oracle(&words.words, 2, 4);
    let cap = 256; // 10% of 400 is below the floor
    let mut omitted = 0;
    for (g, set) in &oracle {
        let expected: Vec<u32> = set.iter().copied().collect();
        if expected.len() > cap {
            omitted += 1;
            assert!(matches!(r.ngram_postings(g), Err(Error::NgramOmitted(_))));
        } else {
            assert_eq!(r.ngram_postings(g).unwrap(), expected, "n-gram {g:?}");
        }
    }
    assert_eq!(r.metadata().ngrams_omitted, omitted);
    assert_eq!(r.ngram_postings("qqqq").unwrap(), Vec::<u32>::new());
}

#[test]
fn frequent_ngrams_are_omitted() {
    let dir = tempfile::tempdir().unwrap();
    let ks: Vec<String> = (0..3000).map(|i| format!("w{i:05}")).collect();
    let vs = raw_vectors(3000, 2, 8);
    let (_, r) = build(dir.path(), "o.vst", &ks, &vs, &opts(Tier::Medium, 2));
    // "\u{1}w0" is in every key; 10% of 3000 is 300.
    assert!(matches!(r.ngram_postings("\u{1}w0"), Err(Error::NgramOmitted(_))));
    // "w001" survives the cap (keys like "w00012" shrink to "w0012").
    let oracle = postings_oracle(&ks, 3, 6);
    let expected: Vec<u32> = oracle["w001"].iter().copied().collect();
    assert!(expected.len() > 100 && expected.len() <= 300);
    assert_eq!(r.ngram_postings("w001").unwrap(), expected);
    assert!(r.metadata().ngrams_omitted > 0);
}

#[test]
fn open_reads_only_the_head() {
    let dir = tempfile::tempdir().unwrap();
    let mut sizes = Vec::new();
    for n in [10, 1000, 20_000] {
        let ks: Vec<String> = (0..n).map(|i| format!("w{i:06}")).collect();
        let vs = raw_vectors(n, 16, 4);
        let (_, r) = build(dir.path(), &format!("{n}.vst"), &ks, &vs, &opts(Tier::Medium, 7));
        sizes.push(r.open_bytes_read());
    }
    assert!(sizes.iter().all(|&s| s < 1024), "{sizes:?}");
    assert!(sizes.windows(2).all(|w| w[0] == w[1]), "{sizes:?}");
}

fn write_small(dir: &std::path::Path, tier: Tier) -> std::path::PathBuf {
    build(dir, "c.vst", &keys(300), &raw_vectors(300, 8, 9), &opts(tier, 4)).0
}

#[test]
fn bad_magic_version_and_truncation() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_small(dir.path(), Tier::Medium);
    let good = fs::read(&path).unwrap();

    let mut bad = good.clone();
    bad[..4].copy_from_slice(b"NOPE");
    fs::write(&path, &bad).unwrap();
    assert!(matches!(
        StoreReader::open(&path),
        Err(Error::BadMagic { found }) if &found == b"NOPE"
    ));

    let mut bad = good.clone();
    bad[4] = 9;
    fs::write(&path, &bad).unwrap();
    assert!(matches!(
        StoreReader::open(&path),
        Err(Error::UnsupportedVersion { found: 9, supported: 1 })
    ));

    fs::write(&path, &good[..good.len() - 3]).unwrap();
    match StoreReader::open(&path) {
        Err(Error::TruncatedFile { end, file_len, .. }) => {
            assert_eq!(end, good.len() as u64);
            assert_eq!(file_len, good.len() as u64 - 3);
        }
        other => panic!("expected TruncatedFile, got {other:?}"),
    }

    fs::write(&path, &good[..5]).unwrap();
    assert!(matches!(StoreReader::open(&path), Err(Error::TruncatedFile { .. })));
}

#[test]
fn corruption_is_detected() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_small(dir.path(), Tier::Heavy);
    let good = fs::read(&path).unwrap();
    let r = StoreReader::open(&path).unwrap();
    let section = |id: SectionId| *r.sections().iter().find(|s| s.id == id as u32).unwrap();
    let vectors = section(SectionId::Vectors);
    let ann = section(SectionId::Ann);
    let meta = section(SectionId::Metadata);
    drop(r);

    // A flipped vector byte still opens but fails verification.
    let mut bad = good.clone();
    bad[vectors.offset as usize + 3] ^= 0x40;
    fs::write(&path, &bad).unwrap();
    let r = StoreReader::open(&path).unwrap();
    assert!(matches!(
        r.verify(),
        Err(Error::CorruptSection { section: "vectors", .. })
    ));
    drop(r);

    // The ANN payload checksum is checked on first use.
    let mut bad = good.clone();
    bad[ann.offset as usize + 16] ^= 1;
    fs::write(&path, &bad).unwrap();
    let r = StoreReader::open(&path).unwrap();
    assert!(matches!(r.load_ann(), Err(Error::CorruptAnnSection { .. })));
    drop(r);

    // Metadata is checked at open.
    let mut bad = good.clone();
    bad[meta.offset as usize] ^= 1;
    fs::write(&path, &bad).unwrap();
    assert!(matches!(
        StoreReader::open(&path),
        Err(Error::CorruptSection { section: "metadata", .. })
    ));

    // A section table entry pointing past the end.
    let mut bad = good.clone();
    let entry = HEADER_LEN + 3 * 32; // fourth section
    bad[entry + 16..entry + 24].copy_from_slice(&u64::MAX.to_le_bytes());
    fs::write(&path, &bad).unwrap();
    assert!(matches!(StoreReader::open(&path), Err(Error::TruncatedFile { .. })));
}

#[test]
fn reader_is_shareable() {
    fn assert_send_sync<T: Send + Sync>() {}
    assert_send_sync::<StoreReader>();

    let dir = tempfile::tempdir().unwrap();
    let path = write_small(dir.path(), Tier::Medium);
    let r = std::sync::Arc::new(StoreReader::open(&path).unwrap());
    let expected: Vec<Vec<f32>> = (0..300).map(|o| r.read_vector(o).unwrap().into_inner()).collect();
    std::thread::scope(|s| {
        for t in 0..4 {
            let r = &r;
            let expected = &expected;
            s.spawn(move || {
                for o in (t..300).step_by(4) {
                    assert_eq!(r.read_vector(o as u32).unwrap().as_slice(), &expected[o][..]);
                }
            });
        }
    });
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn random_stores_round_trip(
        rows in proptest::collection::btree_map(
            "[a-z]{1,6}",
            proptest::collection::vec(-100.0f32..100.0, 5),
            1..40,
        ),
        precision in 0u32..=9,
    ) {
        let rows: Vec<(String, Vec<f32>)> = rows
            .into_iter()
            .filter(|(_, v)| v.iter().any(|&x| x.abs() > 1e-3))
            .collect();
        prop_assume!(!rows.is_empty());
        let dir = tempfile::tempdir().unwrap();
        let ks: Vec<String> = rows.iter().map(|r| r.0.clone()).collect();
        let vs: Vec<Vec<f32>> = rows.iter().map(|r| r.1.clone()).collect();
        let (_, r) = build(dir.path(), "p.vst", &ks, &vs, &opts(Tier::Medium, precision));
        prop_assert_eq!(r.key_count() as usize, rows.len());
        let tol = 0.5 * 10f64.powi(-(precision as i32));
        for (k, v) in &rows {
            let got = r.vector(k).unwrap();
            for (g, w) in got.iter().zip(normalize_oracle(v)) {
                prop_assert!((*g as f64 - w).abs() <= tol + half_ulp(w) + 1e-15);
            }
        }
    }
}
