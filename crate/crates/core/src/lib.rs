//! Probing harness for tweet representations.
//!
//! The crate builds thirteen elementary property-prediction datasets over a
//! tweet corpus (length, content, word order, slang, hashtags, named
//! entities, capitalization, mentions, replies and conversation structure),
//! embeds tweets with native baselines or externally computed vectors, and
//! measures how much of each property a linear softmax probe can read back
//! from the frozen representation.
//!
//! Module map:
//!
//! * [`corpus`] tokenization, ingestion, conversation threading, synthetic corpora
//! * [`taskgen`] the thirteen task constructors, balancing and stratified splits
//! * [`embedders`] BOW TF-IDF, bag-of-means, LDA, word vectors, interchange tables
//! * [`probe`] feature assembly, softmax training, metrics, gradient checks
//! * [`fasttext`] the end-to-end hashed n-gram model
//! * [`analysis`] length slicing, size sweeps, trend labels, model ranking
//! * [`report`] grid rendering and the bundled reference table
//! * [`pipeline`] one-call runs of a (model, task) cell
//! * [`cli`] the `tweetprobe` command line

pub mod analysis;
pub mod cli;
pub mod corpus;
pub mod embedders;
pub mod fasttext;
pub mod hashing;
pub mod pipeline;
pub mod probe;
pub mod report;
pub mod taskgen;

pub use analysis::{classify_trend, rank_models, MetricsGrid, TrendLabel};
pub use corpus::{tokenize, Corpus, Token, TokenKind, Tweet};
pub use embedders::{EmbeddingTable, TweetEmbedder, WordVecStore};
pub use probe::{Metrics, ProbeModel, TrainConfig};
pub use taskgen::{build_task, AuxItem, TaskConfig, TaskDataset, TaskInstance, TaskKind};

use thiserror::Error;

/// Crate-level error used where several subsystems meet (pipelines, CLI).
#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Corpus(#[from] corpus::CorpusError),
    #[error(transparent)]
    Task(#[from] taskgen::TaskError),
    #[error(transparent)]
    Embed(#[from] embedders::EmbedError),
    #[error(transparent)]
    Probe(#[from] probe::ProbeError),
    #[error(transparent)]
    Analysis(#[from] analysis::AnalysisError),
    #[error(transparent)]
    Report(#[from] report::ReportError),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
