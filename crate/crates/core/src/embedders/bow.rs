use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::{EmbedError, Embedding, TweetEmbedder};
use crate::corpus::{Corpus, Token, Tweet};
use crate::taskgen::AuxItem;

pub const DEFAULT_BOW_K: usize = 50_000;
pub const DEFAULT_BOW_MAX_N: usize = 5;

/// Top-K n-gram vocabulary with document frequencies.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BowVocab {
    /// Kept n-grams, sorted by (corpus frequency desc, text asc).
    pub ngrams: Vec<String>,
    pub freq: Vec<u64>,
    pub df: Vec<u32>,
    pub n_docs: usize,
    pub max_n: usize,
    #[serde(skip)]
    index: HashMap<String, u32>,
}

fn grams_of(words: &[&str], max_n: usize) -> Vec<String> {
    (1..=max_n)
        .flat_map(|n| words.windows(n).map(|w| w.join(" ")))
        .collect()
}

fn wordlike(tokens: &[Token]) -> Vec<&str> {
    tokens
        .iter()
        .filter(|t| t.kind.is_wordlike())
        .map(|t| t.surface.as_str())
        .collect()
}

/// Counts token n-grams (n = 1..=max_n over Word/Hashtag/Mention/Number
/// tokens) and keeps the `k` most frequent.
pub fn fit_bow(corpus: &Corpus, k: usize, max_n: usize) -> Result<BowVocab, EmbedError> {
    if corpus.is_empty() {
        return Err(EmbedError::EmptyCorpus);
    }
    if k == 0 || max_n == 0 {
        return Err(EmbedError::InvalidParameter("k and max_n must be positive".into()));
    }
    let mut counts: HashMap<String, (u64, u32)> = HashMap::new();
    for t in corpus.tweets() {
        let mut seen: HashMap<String, ()> = HashMap::new();
        for g in grams_of(&wordlike(&t.tokens), max_n) {
            let e = counts.entry(g.clone()).or_default();
            e.0 += 1;
            if seen.insert(g, ()).is_none() {
                e.1 += 1;
            }
        }
    }
    let mut ranked: Vec<(String, u64, u32)> =
        counts.into_iter().map(|(g, (f, d))| (g, f, d)).collect();
    ranked.sort_unstable_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    ranked.truncate(k);
    let mut vocab = BowVocab {
        ngrams: Vec::with_capacity(ranked.len()),
        freq: Vec::with_capacity(ranked.len()),
        df: Vec::with_capacity(ranked.len()),
        n_docs: corpus.len(),
        max_n,
        index: HashMap::new(),
    };
    for (g, f, d) in ranked {
        vocab.ngrams.push(g);
        vocab.freq.push(f);
        vocab.df.push(d);
    }
    vocab.rebuild_index();
    Ok(vocab)
}

impl BowVocab {
    /// Restores the lookup table after deserialization.
    pub fn rebuild_index(&mut self) {
        self.index = self
            .ngrams
            .iter()
            .enumerate()
            .map(|(i, g)| (g.clone(), i as u32))
            .collect();
    }

    pub fn len(&self) -> usize {
        self.ngrams.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ngrams.is_empty()
    }

    pub fn index_of(&self, gram: &str) -> Option<u32> {
        self.index.get(gram).copied()
    }

    fn idf(&self, i: u32) -> f64 {
        (self.n_docs as f64 / f64::from(self.df[i as usize])).ln()
    }

    fn tfidf(&self, words: &[&str]) -> Embedding {
        let mut tf: HashMap<u32, u32> = HashMap::new();
        for g in grams_of(words, self.max_n) {
            if let Some(i) = self.index_of(&g) {
                *tf.entry(i).or_default() += 1;
            }
        }
        let mut v: Vec<(u32, f64)> = tf
            .into_iter()
            .map(|(i, c)| (i, f64::from(c) * self.idf(i)))
            .filter(|&(_, x)| x != 0.0)
            .collect();
        v.sort_unstable_by_key(|&(i, _)| i);
        Embedding::Sparse(v)
    }
}

/// TF-IDF vector `tf(g) * ln(N / df(g))` over the vocabulary; n-grams
/// outside it are ignored.
pub fn embed_bow(vocab: &BowVocab, tweet: &Tweet) -> Embedding {
    vocab.tfidf(&wordlike(&tweet.tokens))
}

impl TweetEmbedder for BowVocab {
    fn name(&self) -> &str {
        "BOW"
    }

    fn dim(&self) -> usize {
        self.len()
    }

    fn embed_tweet(&self, tweet: &Tweet) -> Result<Embedding, EmbedError> {
        Ok(embed_bow(self, tweet))
    }

    fn embed_aux(&self, item: &AuxItem) -> Option<Embedding> {
        Some(self.tfidf(&item.words()))
    }
}
