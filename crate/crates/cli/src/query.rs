//! `vecstore query STORE <op> ...`. Every result is one line; similarities
//! and components use Rust's shortest round-trip float formatting, so output
//! does not depend on locale.

use std::path::PathBuf;

use clap::{Args, Subcommand};
use vecstore::{AnalogyMethod, QuerySession, SearchHit, SearchMethod};

use crate::{CmdResult, Failure};

#[derive(Debug, Args)]
pub struct QueryArgs {
    /// Store file to read.
    pub store: PathBuf,
    #[command(subcommand)]
    pub op: QueryOp,
}

#[derive(Debug, Subcommand)]
pub enum QueryOp {
    /// Print `key v1 v2 ...` for each key (OOV keys are synthesized).
    Vector { keys: Vec<String> },
    /// Nearest neighbours as `key<TAB>similarity` lines.
    Similar {
        key: String,
        #[arg(short = 'k', long, default_value_t = 10)]
        k: usize,
        /// Use the forest with this effort in [0, 1] (heavy stores only).
        #[arg(long)]
        effort: Option<f32>,
    },
    /// Keys completing an analogy, as `key<TAB>score` lines.
    Analogy {
        /// Comma-separated positive keys.
        #[arg(long, value_delimiter = ',', required = true)]
        positive: Vec<String>,
        /// Comma-separated negative keys.
        #[arg(long, value_delimiter = ',')]
        negative: Vec<String>,
        /// Use the multiplicative objective.
        #[arg(long)]
        mul: bool,
        #[arg(short = 'k', long, default_value_t = 10)]
        k: usize,
    },
    /// `true` or `false` per key.
    Contains { keys: Vec<String> },
    /// Cosine similarity of two keys.
    Similarity { a: String, b: String },
    /// Keys closer to A than B is.
    CloserThan { a: String, b: String },
}

fn print_hits(hits: &[SearchHit]) {
    for h in hits {
        println!("{}\t{}", h.key, h.similarity);
    }
}

pub fn run(args: QueryArgs) -> CmdResult {
    let session = QuerySession::open(&args.store)?;
    match args.op {
        QueryOp::Vector { keys } => {
            if keys.is_empty() {
                return Err(Failure::usage("vector needs at least one key"));
            }
            for key in keys {
                let v = session.query_key(&key)?;
                let mut line = key;
                for x in v.iter() {
                    line.push(' ');
                    line.push_str(&x.to_string());
                }
                println!("{line}");
            }
        }
        QueryOp::Similar { key, k, effort } => {
            let method = match effort {
                Some(e) => SearchMethod::Approximate(e),
                None => SearchMethod::Exact,
            };
            print_hits(&session.most_similar(key.as_str(), k, method)?);
        }
        QueryOp::Analogy {
            positive,
            negative,
            mul,
            k,
        } => {
            let pos: Vec<&str> = positive.iter().map(String::as_str).collect();
            let neg: Vec<&str> = negative.iter().map(String::as_str).collect();
            let method = if mul { AnalogyMethod::Mul } else { AnalogyMethod::Add };
            print_hits(&session.analogy(&pos, &neg, method, k)?);
        }
        QueryOp::Contains { keys } => {
            for key in keys {
                println!("{}", session.contains(&key));
            }
        }
        QueryOp::Similarity { a, b } => println!("{}", session.similarity(&a, &b)?),
        QueryOp::CloserThan { a, b } => print_hits(&session.closer_than(&a, &b)?),
    }
    Ok(())
}
