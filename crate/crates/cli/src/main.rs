mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rambo_core::RamboError;

#[derive(Debug, Parser)]
#[command(name = "rambo", version, about = "Build and query RAMBO multi-set membership indexes")]
pub struct Cli {
    /// Master seed for every hash function and random draw.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Index file to write (build, stack) or read (query, fold, stats).
    #[arg(long, global = true)]
    pub index: Option<PathBuf>,
    /// Print machine-readable JSON instead of text.
    #[arg(long, global = true)]
    pub json: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Index a directory of files, one set per file.
    Build(BuildArgs),
    /// Query terms or sequences; one TSV line per query.
    Query(QueryArgs),
    /// Halve B one or more times.
    Fold(FoldArgs),
    /// Stack shard files into one index.
    Stack(StackArgs),
    /// Planted-term false-positive benchmark on a synthetic corpus.
    BenchFp(BenchArgs),
    /// Evaluate the cost and accuracy formulas for a parameter point.
    Analyze(AnalyzeArgs),
    /// Per-cell fill and membership statistics of an index.
    Stats,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Kind {
    Sequence,
    Document,
}

#[derive(Debug, Args)]
pub struct BuildArgs {
    /// Corpus directory.
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, value_enum, default_value_t = Kind::Sequence)]
    pub kind: Kind,
    /// k-gram length for sequence corpora.
    #[arg(long, default_value_t = 31)]
    pub k: u16,
    /// Newline-separated stopwords for document corpora.
    #[arg(long)]
    pub stoplist: Option<PathBuf>,
    /// Cells per table; defaults to √(K/η).
    #[arg(long = "B")]
    pub buckets: Option<u32>,
    /// Tables; defaults to ⌈ln K − ln δ⌉.
    #[arg(long = "R")]
    pub repetitions: Option<u16>,
    /// Target false-positive rate of each filter.
    #[arg(long, default_value_t = 0.01)]
    pub p: f64,
    #[arg(long, default_value_t = 2)]
    pub eta: u16,
    /// Failure probability used to choose R when --R is absent.
    #[arg(long, default_value_t = 0.01)]
    pub delta: f64,
    /// Files read to estimate the average set cardinality.
    #[arg(long, default_value_t = 10)]
    pub sample_files: usize,
    /// Require a power-of-two B so the index can be folded down.
    #[arg(long)]
    pub foldable: bool,
    #[arg(long, requires = "local_b")]
    pub shards: Option<u16>,
    /// Cells per table on each shard.
    #[arg(long, requires = "shards")]
    pub local_b: Option<u32>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum Mode {
    /// Intersect single-term answers.
    Term,
    /// Keep a cell only if every term hits it.
    Bucket,
}

#[derive(Debug, Args)]
pub struct QueryArgs {
    /// Queries; read from standard input, one per line, when absent.
    pub queries: Vec<String>,
    /// Treat each query as a sequence and test all its k-grams.
    #[arg(long)]
    pub sequence: bool,
    /// How whitespace-separated terms in one query are combined.
    #[arg(long, value_enum, default_value_t = Mode::Term)]
    pub mode: Mode,
    /// Append probe and intersection-work counters.
    #[arg(long)]
    pub probes: bool,
}

#[derive(Debug, Args)]
pub struct FoldArgs {
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 1)]
    pub times: u32,
    /// Absent terms, one per line, to measure FP before and after.
    #[arg(long)]
    pub probe_file: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct StackArgs {
    /// Shard files in shard order; defaults to `<index>.shard0`, `<index>.shard1`, ...
    pub shards: Vec<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum Law {
    /// V = 1 + ⌊Exp(rate α)⌋
    Rate,
    /// V = 1 + ⌊Exp(mean α)⌋
    Mean,
    /// V = --v for every term
    Fixed,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    #[arg(long, default_value_t = 1000)]
    pub queries: u32,
    #[arg(long, default_value_t = 30)]
    pub term_length: u32,
    #[arg(long, default_value_t = 100.0)]
    pub alpha: f64,
    #[arg(long, value_enum, default_value_t = Law::Rate)]
    pub law: Law,
    /// Multiplicity for `--law fixed`.
    #[arg(long, default_value_t = 1)]
    pub v: u32,
    /// Cap on V; defaults to K.
    #[arg(long)]
    pub k_cap: Option<u32>,
    #[arg(long = "K", default_value_t = 100)]
    pub sets: u32,
    #[arg(long, default_value_t = 1000)]
    pub terms_per_set: u32,
    #[arg(long = "B", default_value_t = 16)]
    pub buckets: u32,
    #[arg(long = "R", default_value_t = 2)]
    pub repetitions: u16,
    #[arg(long, default_value_t = 2)]
    pub eta: u16,
    #[arg(long, default_value_t = 0.01)]
    pub p: f64,
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    #[arg(long = "K")]
    pub sets: u64,
    #[arg(long = "B")]
    pub buckets: Option<u64>,
    #[arg(long = "R")]
    pub repetitions: Option<u32>,
    #[arg(long = "V", default_value_t = 1)]
    pub multiplicity: u64,
    #[arg(long, default_value_t = 0.01)]
    pub p: f64,
    #[arg(long, default_value_t = 2)]
    pub eta: u32,
    #[arg(long, default_value_t = 0.01)]
    pub delta: f64,
    /// Total insertions N for the memory estimate.
    #[arg(long = "N", default_value_t = 0)]
    pub insertions: u64,
}

/// A failure with the process exit code it maps to.
#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub message: String,
}

impl Failure {
    pub fn usage(message: impl Into<String>) -> Self {
        Self { code: 1, message: message.into() }
    }
}

impl From<RamboError> for Failure {
    fn from(e: RamboError) -> Self {
        let code = match e {
            RamboError::InvalidParameter(_) => 1,
            RamboError::CorruptIndex(_) | RamboError::InconsistentIndex(_) => 3,
            _ => 2,
        };
        Self { code, message: e.to_string() }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Self { code: 2, message: e.to_string() }
    }
}

impl From<serde_json::Error> for Failure {
    fn from(e: serde_json::Error) -> Self {
        Self { code: 2, message: e.to_string() }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match commands::run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
