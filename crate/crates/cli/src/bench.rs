//! Benchmark harness.
//!
//! Prints an aligned table followed by one `record<TAB>metric<TAB>seconds`
//! line per measurement. Ratios in the table compare each warm measurement
//! with its cold counterpart and the naive text load with the store open.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, ValueEnum};
use vecstore::synthetic::synthetic_records;
use vecstore::{
    write_store, EmbeddingVector, QuerySession, SearchMethod, SessionOptions, StoreOptions,
    StoreReader, Tier,
};

use crate::{CmdResult, Failure};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Suite {
    /// Store open time against a naive full text load.
    Load,
    /// Single-key and 25-key lookups, cold then warm.
    Keys,
    /// Exact k-NN, cold then memoized.
    Exact,
    /// Forest k-NN at effort 1.0 and 0.1 (heavy stores only).
    Approx,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    /// Store file to benchmark.
    #[arg(required_unless_present = "synthetic")]
    pub store: Option<PathBuf>,
    /// Generate N clustered D-dimensional vectors instead of reading a store.
    #[arg(long, num_args = 2, value_names = ["N", "D"], conflicts_with = "store")]
    pub synthetic: Option<Vec<usize>>,
    /// Tier of the synthetic store.
    #[arg(long, default_value = "heavy")]
    pub tier: Tier,
    /// Precision of the synthetic store.
    #[arg(short = 'p', long, default_value_t = 7)]
    pub precision: u32,
    #[arg(long, default_value_t = 7)]
    pub seed: u64,
    /// Text embeddings for the naive-load baseline. Synthetic runs write
    /// their own.
    #[arg(long)]
    pub text: Option<PathBuf>,
    /// Suites to run (default: all that the store's tier supports).
    #[arg(long, value_enum, value_delimiter = ',')]
    pub suite: Vec<Suite>,
    /// Distinct queries averaged per search measurement.
    #[arg(long, default_value_t = 20)]
    pub queries: usize,
    #[arg(short = 'k', long, default_value_t = 10)]
    pub k: usize,
}

struct Report {
    rows: Vec<(String, f64, String)>,
}

impl Report {
    fn push(&mut self, metric: &str, seconds: f64, note: impl Into<String>) {
        self.rows.push((metric.to_owned(), seconds, note.into()));
    }

    fn get(&self, metric: &str) -> Option<f64> {
        self.rows.iter().find(|r| r.0 == metric).map(|r| r.1)
    }

    fn print(&self) {
        let w = self.rows.iter().map(|r| r.0.len()).max().unwrap_or(6).max(6);
        println!("{:<w$}  {:>14}  note", "metric", "seconds");
        for (m, s, note) in &self.rows {
            println!("{m:<w$}  {s:>14.9}  {note}");
        }
        for (m, s, _) in &self.rows {
            println!("record\t{m}\t{s:.9}");
        }
    }
}

fn timed<T>(f: impl FnOnce() -> T) -> (T, f64) {
    let t = Instant::now();
    let out = f();
    (out, t.elapsed().as_secs_f64())
}

fn ratio(slow: Option<f64>, fast: Option<f64>) -> String {
    match (slow, fast) {
        (Some(s), Some(f)) if f > 0.0 => format!("{:.1}x faster", s / f),
        _ => String::new(),
    }
}

/// The naive alternative: read every line of a text file into a map.
fn naive_text_load(path: &Path) -> std::io::Result<usize> {
    let mut map: HashMap<String, Vec<f32>> = HashMap::new();
    for line in BufReader::new(File::open(path)?).lines() {
        let line = line?;
        let mut parts = line.split_ascii_whitespace();
        let Some(key) = parts.next() else { continue };
        let v: Vec<f32> = parts.filter_map(|p| p.parse().ok()).collect();
        if v.len() > 1 {
            map.insert(key.to_owned(), v);
        }
    }
    Ok(map.len())
}

fn write_text(path: &Path, n: usize, d: usize, seed: u64) -> vecstore::Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    for rec in synthetic_records(n, d, seed) {
        let rec = rec?;
        write!(out, "{}", rec.key)?;
        for x in rec.vector.as_slice() {
            write!(out, " {x}")?;
        }
        writeln!(out)?;
    }
    out.flush()?;
    Ok(())
}

fn resident_kib() -> Option<u64> {
    let status = std::fs::read_to_string("/proc/self/status").ok()?;
    let line = status.lines().find(|l| l.starts_with("VmRSS:"))?;
    line.split_whitespace().nth(1)?.parse().ok()
}

pub fn run(args: BenchArgs) -> CmdResult {
    let tmp = tempfile::tempdir()?;
    let (store, text) = match &args.synthetic {
        Some(nd) => {
            let (n, d) = (nd[0], nd[1]);
            if n < 2 || d == 0 {
                return Err(Failure::usage("--synthetic needs N >= 2 and D >= 1"));
            }
            let store = tmp.path().join("synthetic.vst");
            let opts = StoreOptions {
                precision: args.precision,
                ..StoreOptions::with_tier(args.tier)
            };
            let (_, secs) = timed(|| write_store(&store, synthetic_records(n, d, args.seed), &opts));
            eprintln!("built {n}x{d} {} store in {secs:.2}s", args.tier);
            let text = match &args.text {
                Some(t) => t.clone(),
                None => {
                    let t = tmp.path().join("synthetic.txt");
                    write_text(&t, n, d, args.seed)?;
                    t
                }
            };
            (store, Some(text))
        }
        None => (args.store.clone().expect("clap requires a store"), args.text.clone()),
    };

    let probe = StoreReader::open(&store)?;
    let tier = probe.tier();
    let suites: Vec<Suite> = if args.suite.is_empty() {
        let mut all = vec![Suite::Load, Suite::Keys, Suite::Exact];
        if tier.has_ann() {
            all.push(Suite::Approx);
        }
        all
    } else {
        args.suite.clone()
    };
    if suites.contains(&Suite::Approx) && !tier.has_ann() {
        return Err(Failure::usage(format!(
            "the approx suite needs a heavy store, this one is {tier}"
        )));
    }
    let n = probe.key_count() as usize;
    let queries = args.queries.clamp(1, n);
    // Probes are spread over the whole key range.
    let probe_keys: Vec<String> = (0..queries.max(26))
        .map(|i| probe.key(((i * 7919) % n) as u32).map(str::to_owned))
        .collect::<vecstore::Result<_>>()?;
    drop(probe);

    let mut report = Report { rows: Vec::new() };
    if suites.contains(&Suite::Load) {
        let (r, secs) = timed(|| StoreReader::open(&store));
        let r = r?;
        report.push("open", secs, format!("{} bytes read", r.open_bytes_read()));
        if let Some(text) = &text {
            let (count, secs) = timed(|| naive_text_load(text));
            let count = count?;
            let note = format!("{count} keys; {}", ratio(Some(secs), report.get("open")))
                .replace("faster", "slower than open");
            report.push("naive_text_load", secs, note);
        }
    }

    let session = QuerySession::with_options(vec![StoreReader::open(&store)?.into()], SessionOptions::default())?;
    if suites.contains(&Suite::Keys) {
        let k = &probe_keys[0];
        let (_, cold) = timed(|| session.query_key(k));
        let (_, warm) = timed(|| session.query_key(k));
        report.push("single_key_cold", cold, "");
        report.push("single_key_warm", warm, ratio(Some(cold), Some(warm)));
        let bulk = &probe_keys[1..26];
        let (_, cold) = timed(|| session.query_keys(bulk));
        let (_, warm) = timed(|| session.query_keys(bulk));
        report.push("bulk25_cold", cold, "");
        report.push("bulk25_warm", warm, ratio(Some(cold), Some(warm)));
    }

    // Per-query search timings bypass the result cache.
    let uncached = QuerySession::with_options(
        vec![StoreReader::open(&store)?.into()],
        SessionOptions {
            result_cache_capacity: 0,
            ..SessionOptions::default()
        },
    )?;
    let vectors: Vec<EmbeddingVector> = probe_keys[..queries]
        .iter()
        .map(|k| uncached.query_key(k).map(|v| EmbeddingVector::new(v.to_vec())))
        .collect::<vecstore::Result<vecstore::Result<_>>>()??;
    let mean_search = |method: SearchMethod| -> vecstore::Result<f64> {
        let mut total = 0.0;
        for v in &vectors {
            let (r, secs) = timed(|| uncached.most_similar(v.clone(), args.k, method));
            r?;
            total += secs;
        }
        Ok(total / vectors.len() as f64)
    };
    if suites.contains(&Suite::Exact) {
        report.push("knn_exact", mean_search(SearchMethod::Exact)?, format!("mean of {queries}"));
        let k = probe_keys[0].as_str();
        let (_, cold) = timed(|| session.most_similar(k, args.k, SearchMethod::Exact));
        let (_, warm) = timed(|| session.most_similar(k, args.k, SearchMethod::Exact));
        report.push("knn_exact_cold", cold, "");
        report.push("knn_exact_warm", warm, ratio(Some(cold), Some(warm)));
    }
    if suites.contains(&Suite::Approx) {
        let (forest, secs) = timed(|| StoreReader::open(&store).and_then(|r| r.load_ann().map(|_| ())));
        forest?;
        report.push("ann_load", secs, "open + decompress");
        // Touch the forest once so the timings below exclude decompression.
        uncached.most_similar(vectors[0].clone(), args.k, SearchMethod::Approximate(0.0))?;
        let full = mean_search(SearchMethod::Approximate(1.0))?;
        report.push("knn_approx_effort_1.0", full, ratio(report.get("knn_exact"), Some(full)) + " vs exact");
        let tenth = mean_search(SearchMethod::Approximate(0.1))?;
        report.push("knn_approx_effort_0.1", tenth, ratio(Some(full), Some(tenth)) + " vs effort 1.0");
    }
    if let Some(kib) = resident_kib() {
        eprintln!("resident set: {kib} KiB (informational)");
    }
    report.print();
    Ok(())
}
