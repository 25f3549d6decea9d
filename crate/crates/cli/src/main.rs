use std::process::ExitCode;

use clap::{Parser, Subcommand};

mod bench;
mod convert;
mod query;

/// Convert, query and benchmark vecstore files.
#[derive(Debug, Parser)]
#[command(name = "vecstore", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Compile a word2vec, GloVe or fastText file into a store.
    Convert(convert::ConvertArgs),
    /// Look up vectors, neighbours and analogies in a store.
    Query(query::QueryArgs),
    /// Time opens, lookups and searches against a store or synthetic data.
    Bench(bench::BenchArgs),
}

/// Failure with the process exit code it maps to.
#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub error: anyhow::Error,
}

impl Failure {
    pub fn usage(msg: impl Into<String>) -> Self {
        Self {
            code: 1,
            error: anyhow::anyhow!(msg.into()),
        }
    }
}

/// I/O problems exit with 2; everything else (bad input data, bad
/// arguments, unsupported operations) with 1.
impl From<vecstore::Error> for Failure {
    fn from(e: vecstore::Error) -> Self {
        let code = match e {
            vecstore::Error::Io(_) | vecstore::Error::TruncatedFile { .. } => 2,
            _ => 1,
        };
        Self {
            code,
            error: e.into(),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Self {
            code: 2,
            error: e.into(),
        }
    }
}

pub type CmdResult = Result<(), Failure>;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let result = match cli.command {
        Command::Convert(a) => convert::run(a),
        Command::Query(a) => query::run(a),
        Command::Bench(a) => bench::run(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {:#}", f.error);
            ExitCode::from(f.code)
        }
    }
}
