//! Tweet corpora: tokenization, ingestion, conversation threading and a
//! seeded synthetic generator with gold annotations.

mod io;
mod synth;
mod thread;
mod token;

pub use io::{load_corpus, read_jsonl, read_sentiment140_csv, write_jsonl, CorpusFormat};
pub use synth::{
    generate_synthetic, generate_topic_corpus, SynthConfig, SynthTruth, Synthetic, TopicCorpus,
    SLANG_LEXICON,
};
pub use thread::{thread_conversations, Conversation, Threads};
pub use token::{tokenize, word_count, Token, TokenKind};

use std::collections::HashMap;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::hashing::sha256_hex;

/// Maximum UTF-8 size of a tweet text accepted by the loaders.
pub const MAX_TWEET_BYTES: usize = 560;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("malformed record at line {line}: {reason}")]
    MalformedRecord { line: usize, reason: String },
    #[error("duplicate tweet id {0:?}")]
    DuplicateId(String),
    #[error("invalid synthetic config: {0}")]
    InvalidConfig(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

/// A slang token and the canonical spelling it stands for.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SlangPair {
    pub index: usize,
    pub canonical: String,
}

/// Gold annotations carried alongside a tweet. Indices are token indices.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Annotations {
    /// Half-open `[start, end)` token ranges of named entities.
    pub ne_spans: Vec<(usize, usize)>,
    pub slang: Vec<SlangPair>,
    /// `None` when the source never annotated it; consumers may derive it
    /// from `ne_spans`.
    pub informative_caps: Option<Vec<usize>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Tweet {
    pub id: String,
    pub text: String,
    pub tokens: Vec<Token>,
    pub timestamp: Option<DateTime<Utc>>,
    pub reply_to: Option<String>,
    pub annotations: Annotations,
}

impl Tweet {
    /// Tokenizes `text` and builds an unannotated tweet.
    pub fn new(id: impl Into<String>, text: impl Into<String>) -> Self {
        let text = text.into();
        Tweet {
            id: id.into(),
            tokens: tokenize(&text),
            text,
            timestamp: None,
            reply_to: None,
            annotations: Annotations::default(),
        }
    }

    pub fn word_count(&self) -> usize {
        word_count(&self.tokens)
    }

    /// Informative capitalized token indices, derived from NE spans when
    /// the annotation is absent.
    pub fn informative_caps(&self) -> Vec<usize> {
        match &self.annotations.informative_caps {
            Some(v) => v.clone(),
            None => self
                .annotations
                .ne_spans
                .iter()
                .flat_map(|&(s, e)| s..e)
                .filter(|&i| {
                    let t = &self.tokens[i];
                    t.kind == TokenKind::Word && t.capitalized
                })
                .collect(),
        }
    }

    fn validate(&self, line: usize) -> Result<(), CorpusError> {
        let bad = |reason: String| CorpusError::MalformedRecord { line, reason };
        if self.id.is_empty() {
            return Err(bad("empty id".into()));
        }
        if self.text.len() > MAX_TWEET_BYTES {
            return Err(bad(format!("text exceeds {MAX_TWEET_BYTES} bytes")));
        }
        let n = self.tokens.len();
        for &(s, e) in &self.annotations.ne_spans {
            if s >= e || e > n {
                return Err(bad(format!("ne span [{s},{e}) outside {n} tokens")));
            }
        }
        for p in &self.annotations.slang {
            if p.index >= n {
                return Err(bad(format!("slang index {} outside {n} tokens", p.index)));
            }
        }
        if let Some(caps) = &self.annotations.informative_caps {
            if let Some(i) = caps.iter().find(|&&i| i >= n) {
                return Err(bad(format!("informative cap index {i} outside {n} tokens")));
            }
        }
        Ok(())
    }
}

/// An immutable, id-indexed collection of tweets.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Corpus {
    tweets: Vec<Tweet>,
    index: HashMap<String, usize>,
}

impl Corpus {
    /// Builds a corpus, rejecting duplicate ids and invalid annotations.
    pub fn from_tweets(tweets: Vec<Tweet>) -> Result<Self, CorpusError> {
        let mut index = HashMap::with_capacity(tweets.len());
        for (i, t) in tweets.iter().enumerate() {
            t.validate(i + 1)?;
            if index.insert(t.id.clone(), i).is_some() {
                return Err(CorpusError::DuplicateId(t.id.clone()));
            }
        }
        Ok(Corpus { tweets, index })
    }

    pub fn tweets(&self) -> &[Tweet] {
        &self.tweets
    }

    pub fn get(&self, id: &str) -> Option<&Tweet> {
        self.index.get(id).map(|&i| &self.tweets[i])
    }

    pub fn position(&self, id: &str) -> Option<usize> {
        self.index.get(id).copied()
    }

    pub fn len(&self) -> usize {
        self.tweets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tweets.is_empty()
    }

    /// Content hash of the canonical JSONL serialization (16 hex chars).
    pub fn fingerprint(&self) -> String {
        let mut buf = Vec::new();
        write_jsonl(self, &mut buf).expect("in-memory write");
        sha256_hex(&buf)[..16].to_string()
    }
}
