//! The thirteen elementary property-prediction tasks.
//!
//! Each constructor turns a corpus into labeled instances (a tweet id, up to
//! two auxiliary words or n-grams, and a class label). Binary tasks are
//! balanced exactly by downsampling the majority class; every dataset is
//! shuffled and split with label stratification. Given the same corpus,
//! config and seed, the output is identical bit for bit.

mod builders;
mod io;
mod split;

pub use builders::*;
pub use io::{read_dataset, write_dataset, DatasetMeta};
pub use split::{split, stratified_group_split, stratified_split};

use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::Corpus;
use crate::hashing::{config_hash, derive_seed};

#[derive(Debug, Error)]
pub enum TaskError {
    #[error("task {0} produced no instances on this corpus")]
    NoInstances(TaskKind),
    #[error("split ratios {0:?} must be non-negative and sum to 1")]
    InvalidRatios([f64; 3]),
    #[error("invalid task config: {0}")]
    InvalidConfig(String),
    #[error("corpus is empty")]
    EmptyCorpus,
    #[error("unknown task {0:?}")]
    UnknownTask(String),
    #[error("malformed dataset record at line {line}: {reason}")]
    Malformed { line: usize, reason: String },
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

/// The thirteen tasks, in reporting order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskKind {
    Length,
    Content,
    WordOrder,
    SlangWords,
    Hashtag,
    NamedEntity,
    CapCount,
    InformativeCap,
    MentionCount,
    MentionPosition,
    IsReply,
    ReplyTime,
    WordRepetition,
}

impl TaskKind {
    pub const ALL: [TaskKind; 13] = [
        TaskKind::Length,
        TaskKind::Content,
        TaskKind::WordOrder,
        TaskKind::SlangWords,
        TaskKind::Hashtag,
        TaskKind::NamedEntity,
        TaskKind::CapCount,
        TaskKind::InformativeCap,
        TaskKind::MentionCount,
        TaskKind::MentionPosition,
        TaskKind::IsReply,
        TaskKind::ReplyTime,
        TaskKind::WordRepetition,
    ];

    pub fn name(self) -> &'static str {
        match self {
            TaskKind::Length => "length",
            TaskKind::Content => "content",
            TaskKind::WordOrder => "word_order",
            TaskKind::SlangWords => "slang_words",
            TaskKind::Hashtag => "hashtag",
            TaskKind::NamedEntity => "named_entity",
            TaskKind::CapCount => "cap_count",
            TaskKind::InformativeCap => "informative_cap",
            TaskKind::MentionCount => "mention_count",
            TaskKind::MentionPosition => "mention_position",
            TaskKind::IsReply => "is_reply",
            TaskKind::ReplyTime => "reply_time",
            TaskKind::WordRepetition => "word_repetition",
        }
    }

    /// Column title used in rendered tables.
    pub fn title(self) -> &'static str {
        match self {
            TaskKind::Length => "Length",
            TaskKind::Content => "Content",
            TaskKind::WordOrder => "Word Order",
            TaskKind::SlangWords => "Slang Words",
            TaskKind::Hashtag => "Hashtag",
            TaskKind::NamedEntity => "Named Entity",
            TaskKind::CapCount => "Cap. Count",
            TaskKind::InformativeCap => "Informative Cap.",
            TaskKind::MentionCount => "Mention Count",
            TaskKind::MentionPosition => "Mention Position",
            TaskKind::IsReply => "Is Reply",
            TaskKind::ReplyTime => "Reply Time",
            TaskKind::WordRepetition => "Word Repetition",
        }
    }

    /// Number of auxiliary inputs every instance of this task carries.
    pub fn arity(self) -> usize {
        match self {
            TaskKind::Length
            | TaskKind::CapCount
            | TaskKind::MentionCount
            | TaskKind::MentionPosition
            | TaskKind::IsReply
            | TaskKind::ReplyTime => 0,
            TaskKind::Content
            | TaskKind::Hashtag
            | TaskKind::NamedEntity
            | TaskKind::InformativeCap
            | TaskKind::WordRepetition => 1,
            TaskKind::WordOrder | TaskKind::SlangWords => 2,
        }
    }

    pub fn is_binary(self) -> bool {
        !matches!(
            self,
            TaskKind::Length
                | TaskKind::CapCount
                | TaskKind::MentionCount
                | TaskKind::MentionPosition
                | TaskKind::ReplyTime
        )
    }

    pub fn class_count(self, cfg: &TaskConfig) -> usize {
        match self {
            TaskKind::Length => cfg.length_max_bin + 1,
            TaskKind::CapCount => cfg.cap_max_class + 1,
            TaskKind::MentionCount => cfg.mention_max_class + 1,
            TaskKind::MentionPosition => cfg.mention_position_max_class + 1,
            TaskKind::ReplyTime => cfg.reply_window_minutes / cfg.reply_bin_minutes,
            _ => 2,
        }
    }
}

impl fmt::Display for TaskKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for TaskKind {
    type Err = TaskError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let norm = s.trim().to_ascii_lowercase().replace(['-', ' '], "_");
        TaskKind::ALL
            .into_iter()
            .find(|k| k.name() == norm)
            .ok_or_else(|| TaskError::UnknownTask(s.to_string()))
    }
}

/// An auxiliary input: a single word or an n-gram of surface forms.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(untagged)]
pub enum AuxItem {
    Word(String),
    Ngram(Vec<String>),
}

impl AuxItem {
    /// Member words in order (one for `Word`).
    pub fn words(&self) -> Vec<&str> {
        match self {
            AuxItem::Word(w) => vec![w.as_str()],
            AuxItem::Ngram(ws) => ws.iter().map(String::as_str).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaskInstance {
    pub tweet_id: String,
    pub aux: Vec<AuxItem>,
    pub label: usize,
}

/// Index lists into `TaskDataset::instances`.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Splits {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub corpus_id: String,
    pub seed: u64,
    pub config_hash: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TaskDataset {
    pub kind: TaskKind,
    pub instances: Vec<TaskInstance>,
    pub class_count: usize,
    pub splits: Splits,
    pub provenance: Provenance,
}

impl TaskDataset {
    pub fn labels(&self) -> Vec<usize> {
        self.instances.iter().map(|i| i.label).collect()
    }

    /// Per-class instance counts.
    pub fn histogram(&self) -> Vec<usize> {
        let mut h = vec![0; self.class_count];
        for inst in &self.instances {
            h[inst.label] += 1;
        }
        h
    }
}

/// Knobs of the task constructors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TaskConfig {
    pub length_bin_width: usize,
    pub length_max_bin: usize,
    pub cap_max_class: usize,
    pub mention_max_class: usize,
    pub mention_position_max_class: usize,
    pub reply_bin_minutes: usize,
    pub reply_window_minutes: usize,
    pub split_ratios: [f64; 3],
}

impl Default for TaskConfig {
    fn default() -> Self {
        TaskConfig {
            length_bin_width: 4,
            length_max_bin: 7,
            cap_max_class: 10,
            mention_max_class: 10,
            mention_position_max_class: 19,
            reply_bin_minutes: 10,
            reply_window_minutes: 60,
            split_ratios: [0.7, 0.1, 0.2],
        }
    }
}

impl TaskConfig {
    pub fn validate(&self) -> Result<(), TaskError> {
        let bad = |m: &str| Err(TaskError::InvalidConfig(m.to_string()));
        if self.length_bin_width == 0 {
            return bad("length_bin_width must be at least 1");
        }
        if self.reply_bin_minutes == 0
            || self.reply_window_minutes == 0
            || !self.reply_window_minutes.is_multiple_of(self.reply_bin_minutes)
        {
            return bad("reply_bin_minutes must divide a positive reply_window_minutes");
        }
        split::check_ratios(self.split_ratios)
    }

    pub fn hash(&self) -> String {
        config_hash(self)
    }
}

/// Builds, balances, shuffles and splits the dataset for one task.
pub fn build_task(
    kind: TaskKind,
    corpus: &Corpus,
    cfg: &TaskConfig,
    seed: u64,
) -> Result<TaskDataset, TaskError> {
    cfg.validate()?;
    if corpus.is_empty() {
        return Err(TaskError::EmptyCorpus);
    }
    let instances = match kind {
        TaskKind::Length => length_instances(corpus, cfg),
        TaskKind::Content => content_instances(corpus, seed),
        TaskKind::WordOrder => word_order_instances(corpus, seed),
        TaskKind::SlangWords => slang_instances(corpus, seed),
        TaskKind::Hashtag => hashtag_instances(corpus, seed),
        TaskKind::NamedEntity => named_entity_instances(corpus, seed),
        TaskKind::CapCount => cap_count_instances(corpus, cfg),
        TaskKind::InformativeCap => informative_cap_instances(corpus, seed),
        TaskKind::MentionCount => mention_count_instances(corpus, cfg),
        TaskKind::MentionPosition => mention_position_instances(corpus, cfg),
        TaskKind::IsReply => is_reply_instances(corpus, seed),
        TaskKind::ReplyTime => reply_time_instances(corpus, cfg),
        TaskKind::WordRepetition => word_repetition_instances(corpus, seed),
    };
    finish(kind, instances, corpus, cfg, seed)
}

fn finish(
    kind: TaskKind,
    mut instances: Vec<TaskInstance>,
    corpus: &Corpus,
    cfg: &TaskConfig,
    seed: u64,
) -> Result<TaskDataset, TaskError> {
    if instances.is_empty() {
        return Err(TaskError::NoInstances(kind));
    }
    let class_count = kind.class_count(cfg);
    debug_assert!(instances
        .iter()
        .all(|i| i.label < class_count && i.aux.len() == kind.arity()));
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, &format!("shuffle:{kind}")));
    instances.shuffle(&mut rng);
    let labels: Vec<usize> = instances.iter().map(|i| i.label).collect();
    let groups: Vec<&str> = instances.iter().map(|i| i.tweet_id.as_str()).collect();
    let splits = stratified_group_split(
        &labels,
        &groups,
        class_count,
        cfg.split_ratios,
        derive_seed(seed, &format!("split:{kind}")),
    )?;
    Ok(TaskDataset {
        kind,
        instances,
        class_count,
        splits,
        provenance: Provenance {
            corpus_id: corpus.fingerprint(),
            seed,
            config_hash: cfg.hash(),
        },
    })
}
