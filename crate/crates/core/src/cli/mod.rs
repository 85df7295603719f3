//! The `tweetprobe` command line.
//!
//! Exit codes: 0 success, 1 validation error (bad flags, config or input
//! files), 2 runtime failure. Every command that writes `--out` also writes
//! `<out>.manifest.json`, which `replay` uses to rerun the command and
//! compare output checksums.

mod commands;
mod manifest;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::corpus::{CorpusError, CorpusFormat};
use crate::embedders::EmbedError;
use crate::probe::ProbeError;
use crate::report::{GridFormat, ReportError};
use crate::taskgen::TaskError;
use crate::analysis::AnalysisError;
use crate::Error;

pub use manifest::Manifest;

pub const CACHE_ENV: &str = "TWEETPROBE_CACHE_DIR";

#[derive(Debug, Parser)]
#[command(name = "tweetprobe", version, about = "Probe tweet representations for elementary properties")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Default, Args)]
pub struct Common {
    /// JSON pipeline config; flags override its values
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Worker threads for commands that run independent cells
    #[arg(long)]
    pub jobs: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SweepKind {
    Size,
    Length,
    Both,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic annotated corpus (JSONL)
    Synth {
        /// Number of tweets
        #[arg(long)]
        n: Option<usize>,
        #[command(flatten)]
        common: Common,
    },
    /// Validate a corpus and rewrite it as JSONL
    Ingest {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long, value_enum, default_value = "jsonl")]
        format: CorpusFormat,
        #[command(flatten)]
        common: Common,
    },
    /// Build task datasets (all tasks unless --task is given)
    Tasks {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long, value_delimiter = ',')]
        task: Vec<String>,
        #[command(flatten)]
        common: Common,
    },
    /// Embed every tweet with a native model into an interchange file
    Embed {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        model: String,
        #[arg(long)]
        word_vectors: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
    /// Train and evaluate one (model, task) cell
    Probe {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        task: String,
        /// bow, lda, bom, random, length_oracle, fasttext, or a name for --external-embeddings
        #[arg(long)]
        model: String,
        #[arg(long)]
        word_vectors: Option<PathBuf>,
        #[arg(long)]
        external_embeddings: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
    /// Representation-size and tweet-length sensitivity for one cell
    Sweep {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        task: String,
        #[arg(long)]
        model: String,
        /// Word vectors; `{size}` in the path is replaced per size
        #[arg(long)]
        word_vectors: Option<PathBuf>,
        /// Interchange file; `{size}` in the path is replaced per size
        #[arg(long)]
        external_embeddings: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "both")]
        kind: SweepKind,
        #[command(flatten)]
        common: Common,
    },
    /// Render score grids and compare them with the reference table
    Report {
        /// `model,task,f1` CSV files to merge (the reference table if none)
        #[arg(long)]
        grid: Vec<PathBuf>,
        /// Append per-cell deltas and rank agreement against the reference
        #[arg(long)]
        diff: bool,
        #[arg(long, value_enum, default_value = "markdown")]
        format: GridFormat,
        #[command(flatten)]
        common: Common,
    },
    /// Rerun a command from its manifest and check outputs are identical
    Replay {
        manifest: PathBuf,
        /// Write the rerun here instead of over the original outputs
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

/// A failed command, split by exit code.
#[derive(Debug)]
pub enum Failure {
    Validation(String),
    Runtime(String),
}

impl Failure {
    pub fn code(&self) -> i32 {
        match self {
            Failure::Validation(_) => 1,
            Failure::Runtime(_) => 2,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Validation(m) | Failure::Runtime(m) => m,
        }
    }
}

fn is_validation(e: &Error) -> bool {
    match e {
        Error::Corpus(c) => !matches!(c, CorpusError::Io(_)),
        Error::Task(t) => matches!(
            t,
            TaskError::InvalidRatios(_) | TaskError::InvalidConfig(_) | TaskError::UnknownTask(_) | TaskError::Malformed { .. }
        ),
        Error::Embed(e) => !matches!(e, EmbedError::Io(_) | EmbedError::EmptyCorpus),
        Error::Probe(p) => matches!(
            p,
            ProbeError::InvalidConfig(_) | ProbeError::Malformed(_) | ProbeError::MissingTweetEmbedding(_)
        ),
        Error::Analysis(a) => matches!(
            a,
            AnalysisError::InvalidParameter(_) | AnalysisError::MissingSizeVariant(_)
        ),
        Error::Report(r) => matches!(r, ReportError::Malformed { .. }),
        Error::Json(_) => true,
        Error::Io(_) => false,
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        if is_validation(&e) {
            Failure::Validation(e.to_string())
        } else {
            Failure::Runtime(e.to_string())
        }
    }
}

macro_rules! failure_from {
    ($($t:ty),*) => {$(
        impl From<$t> for Failure {
            fn from(e: $t) -> Self {
                Failure::from(Error::from(e))
            }
        }
    )*};
}
failure_from!(CorpusError, TaskError, EmbedError, ProbeError, AnalysisError, ReportError, std::io::Error, serde_json::Error);

/// Parses `args` (including the program name) and runs the command.
/// Returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let args: Vec<OsString> = args.into_iter().map(Into::into).collect();
    let cli = match Cli::try_parse_from(&args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let argv: Vec<String> = args.iter().skip(1).map(|a| a.to_string_lossy().into_owned()).collect();
    match commands::execute(cli, argv, None) {
        Ok(()) => 0,
        Err(f) => {
            eprintln!("error: {}", f.message());
            f.code()
        }
    }
}
