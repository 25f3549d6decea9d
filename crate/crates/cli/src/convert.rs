use std::fs::File;
use std::io::{BufReader, Read};
use std::path::{Path, PathBuf};

use clap::Args;
use vecstore::ingest::DETECT_HEAD_LEN;
use vecstore::{detect_format, parse_embeddings, write_store, AnnParams, SourceFormat, StoreOptions, Tier};

use crate::{CmdResult, Failure};

#[derive(Debug, Args)]
pub struct ConvertArgs {
    /// Input embeddings (.bin, .txt or .vec).
    #[arg(short = 'i', long)]
    pub input: PathBuf,
    /// Output store file.
    #[arg(short = 'o', long)]
    pub output: PathBuf,
    /// Skip the subword index (light store: base OOV vectors only).
    #[arg(short = 's', long)]
    pub skip_subword: bool,
    /// Build the approximate-search forest (heavy store).
    #[arg(short = 'a', long, conflicts_with = "skip_subword")]
    pub ann: bool,
    /// Decimal digits kept per component.
    #[arg(short = 'p', long, default_value_t = 7)]
    pub precision: u32,
    /// Input format; detected from the extension and content when omitted.
    #[arg(long, value_parser = parse_format)]
    pub format: Option<SourceFormat>,
    #[arg(long, default_value_t = vecstore::meta::DEFAULT_NGRAM_MIN)]
    pub ngram_min: usize,
    #[arg(long, default_value_t = vecstore::meta::DEFAULT_NGRAM_MAX)]
    pub ngram_max: usize,
    /// Trees in the forest.
    #[arg(long, default_value_t = AnnParams::default().n_trees)]
    pub trees: usize,
    /// Maximum ordinals per forest leaf.
    #[arg(long, default_value_t = AnnParams::default().leaf_cap)]
    pub leaf_cap: usize,
    #[arg(long, default_value_t = AnnParams::default().seed)]
    pub seed: u64,
}

fn parse_format(s: &str) -> Result<SourceFormat, String> {
    match s {
        "word2vec-bin" | "w2v-bin" | "bin" => Ok(SourceFormat::Word2VecBinary),
        "word2vec-text" | "w2v-text" => Ok(SourceFormat::Word2VecText),
        "glove" => Ok(SourceFormat::GloveText),
        "fasttext" | "vec" => Ok(SourceFormat::FastTextText),
        other => Err(format!(
            "unknown format {other:?} (expected word2vec-bin, word2vec-text, glove or fasttext)"
        )),
    }
}

impl ConvertArgs {
    pub fn tier(&self) -> Tier {
        if self.skip_subword {
            Tier::Light
        } else if self.ann {
            Tier::Heavy
        } else {
            Tier::Medium
        }
    }

    pub fn store_options(&self) -> StoreOptions {
        StoreOptions {
            tier: self.tier(),
            precision: self.precision,
            ngram_min: self.ngram_min,
            ngram_max: self.ngram_max,
            ann: AnnParams {
                n_trees: self.trees,
                leaf_cap: self.leaf_cap,
                seed: self.seed,
            },
        }
    }
}

fn sniff(path: &Path) -> Result<SourceFormat, Failure> {
    let mut head = Vec::with_capacity(DETECT_HEAD_LEN);
    File::open(path)?.take(DETECT_HEAD_LEN as u64).read_to_end(&mut head)?;
    let ext = path.extension().and_then(|e| e.to_str()).unwrap_or("");
    Ok(detect_format(ext, &head)?)
}

pub fn run(args: ConvertArgs) -> CmdResult {
    let format = match args.format {
        Some(f) => f,
        None => sniff(&args.input)?,
    };
    let input = BufReader::with_capacity(1 << 20, File::open(&args.input)?);
    let records = parse_embeddings(input, format)?;
    let summary = write_store(&args.output, records, &args.store_options())?;
    println!(
        "converted\tkeys={}\tdimension={}\ttier={}\tprecision={}\tbyte_width={}\tfile_size={}\tduplicates={}\tzero_vectors={}\tngrams={}\tngrams_omitted={}",
        summary.keys_written,
        summary.dimension,
        summary.tier,
        summary.precision,
        summary.byte_width,
        summary.file_size,
        summary.duplicates_replaced,
        summary.zero_vectors_dropped,
        summary.ngrams_indexed,
        summary.ngrams_omitted,
    );
    Ok(())
}
