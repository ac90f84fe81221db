//! The `metaforge` command line: corpus tooling, training, extraction and evaluation.
//!
//! Every option can also come from a flat TOML file given with `--config`; a flag
//! beats the file, which beats the built-in default. The seed may also come from
//! `METAFORGE_SEED`, which sits between the flag and the file.

mod commands;
pub mod config;
pub mod manifest;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::error::Error;

pub use config::{Layers, KEYS, SEED_ENV};
pub use manifest::{FileDigest, RunManifest};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;
pub const EXIT_TRAINING: i32 = 3;

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Run(Error),
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Run(e)
    }
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Run(Error::TrainingFailure(_)) => EXIT_TRAINING,
            CliError::Run(_) => EXIT_DATA,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage error: {m}"),
            CliError::Run(e) => write!(f, "{e}"),
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "metaforge", version, about = "Metadata extraction workbench for scholarly first pages")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct Common {
    /// Flat TOML file whose keys mirror the long flags.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Worker threads; outputs do not depend on it.
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a labeled synthetic corpus, optionally with rasters.
    Synth(SynthArgs),
    /// Annotate token streams by aligning gateway metadata against the page text.
    Align(AlignArgs),
    /// Train an extractor.
    Train(TrainArgs),
    /// Label a corpus with a trained extractor.
    Extract(ExtractArgs),
    /// Score predictions against a gold corpus.
    Eval(EvalArgs),
    /// Time training and per-document inference.
    Bench(BenchArgs),
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[command(flatten)]
    pub common: Common,
    /// Directory of template files; the built-in set when absent.
    #[arg(long)]
    pub templates: Option<PathBuf>,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub raster_dir: Option<PathBuf>,
    #[arg(long)]
    pub dpi: Option<i64>,
    /// Maximum token displacement in points.
    #[arg(long)]
    pub jitter: Option<f64>,
    /// Per-token probability of one character edit.
    #[arg(long)]
    pub corruption: Option<f64>,
}

#[derive(Debug, Args)]
pub struct AlignArgs {
    #[command(flatten)]
    pub common: Common,
    /// Token-stream corpus without annotations.
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// `fixture:<dir>` or `http:<base-url>`.
    #[arg(long)]
    pub gateway: Option<String>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Where documents without any match go; `<out>.rejects.jsonl` by default.
    #[arg(long)]
    pub rejects: Option<PathBuf>,
    #[arg(long)]
    pub threshold: Option<f64>,
    #[arg(long)]
    pub doi_threshold: Option<f64>,
}

#[derive(Debug, Args, Default)]
pub struct Hyper {
    #[arg(long)]
    pub sigma2: Option<f64>,
    #[arg(long)]
    pub max_iters: Option<usize>,
    #[arg(long)]
    pub tol: Option<f64>,
    /// Embedding dimension.
    #[arg(long)]
    pub dim: Option<usize>,
    #[arg(long)]
    pub emb_epochs: Option<usize>,
    #[arg(long)]
    pub hidden: Option<usize>,
    #[arg(long)]
    pub layers: Option<usize>,
    #[arg(long)]
    pub head: Option<usize>,
    #[arg(long)]
    pub shape: Option<bool>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub batch: Option<usize>,
    /// TextMap canvas width in pixels.
    #[arg(long)]
    pub width: Option<usize>,
    #[arg(long)]
    pub channels: Option<usize>,
    #[arg(long)]
    pub heads: Option<usize>,
    #[arg(long)]
    pub det_hidden: Option<usize>,
    /// `per-token` or `per-block`.
    #[arg(long)]
    pub mode: Option<String>,
    #[arg(long)]
    pub geometry: Option<bool>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub common: Common,
    /// crf, bilstm, bilstm-crf, textmap-word2vec, textmap-char2vec or textmap-precomputed.
    #[arg(long)]
    pub method: Option<String>,
    #[arg(long)]
    pub corpus: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Precomputed block embeddings for textmap-precomputed.
    #[arg(long)]
    pub embeddings: Option<PathBuf>,
    #[command(flatten)]
    pub hyper: Hyper,
}

#[derive(Debug, Args)]
pub struct ExtractArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long)]
    pub model: Option<PathBuf>,
    #[arg(long)]
    pub corpus: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Replacement embeddings of the same shape, e.g. block vectors for new documents.
    #[arg(long)]
    pub embeddings: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long)]
    pub gold: Option<PathBuf>,
    #[arg(long)]
    pub pred: Option<PathBuf>,
    /// Also write the full report as JSON.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    #[command(flatten)]
    pub common: Common,
    /// Time an existing extractor instead of training one.
    #[arg(long)]
    pub model: Option<PathBuf>,
    #[arg(long)]
    pub method: Option<String>,
    /// Training corpus.
    #[arg(long)]
    pub corpus: Option<PathBuf>,
    /// Documents to time; the training corpus when absent.
    #[arg(long)]
    pub test: Option<PathBuf>,
    #[arg(long)]
    pub repeats: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub embeddings: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    pub hyper: Hyper,
}

/// Parses `argv` (program name first), runs the command and returns the exit code.
/// Standard output carries results; diagnostics go to standard error.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match commands::dispatch(cli.command) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("metaforge: {e}");
            e.exit_code()
        }
    }
}
