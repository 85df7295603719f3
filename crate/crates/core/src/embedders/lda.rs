use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{EmbedError, Embedding, TweetEmbedder};
use crate::corpus::{Corpus, Token, TokenKind, Tweet};
use crate::hashing::derive_seed;
use crate::taskgen::AuxItem;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LdaConfig {
    pub topics: usize,
    /// Dirichlet prior on document-topic proportions; `None` means 50 / topics.
    pub alpha: Option<f64>,
    pub beta: f64,
    pub train_sweeps: usize,
    pub infer_sweeps: usize,
    /// Inference sweeps discarded before averaging.
    pub infer_burn_in: usize,
    pub seed: u64,
}

impl Default for LdaConfig {
    fn default() -> Self {
        LdaConfig {
            topics: 200,
            alpha: None,
            beta: 0.01,
            train_sweeps: 100,
            infer_sweeps: 50,
            infer_burn_in: 25,
            seed: 0,
        }
    }
}

impl LdaConfig {
    pub fn alpha(&self) -> f64 {
        self.alpha.unwrap_or(50.0 / self.topics as f64)
    }

    fn validate(&self) -> Result<(), EmbedError> {
        let bad = |m: &str| Err(EmbedError::InvalidParameter(m.into()));
        if self.topics == 0 {
            return bad("topics must be positive");
        }
        if !(self.alpha() > 0.0 && self.beta > 0.0) {
            return bad("alpha and beta must be positive");
        }
        if self.infer_sweeps == 0 || self.infer_burn_in >= self.infer_sweeps {
            return bad("infer_burn_in must be below infer_sweeps");
        }
        Ok(())
    }
}

/// Topic model fitted by collapsed Gibbs sampling. Only the topic-word
/// counts are kept; tweets are embedded by folding them in against the
/// frozen counts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LdaModel {
    pub config: LdaConfig,
    pub vocab: Vec<String>,
    /// `topic_word[k * V + w]`
    topic_word: Vec<u32>,
    topic_total: Vec<u32>,
    #[serde(skip)]
    index: HashMap<String, u32>,
}

fn lda_term(t: &Token) -> Option<String> {
    matches!(t.kind, TokenKind::Word | TokenKind::Hashtag | TokenKind::Number)
        .then(|| t.stripped().to_lowercase())
}

pub fn fit_lda(corpus: &Corpus, cfg: &LdaConfig) -> Result<LdaModel, EmbedError> {
    if corpus.is_empty() {
        return Err(EmbedError::EmptyCorpus);
    }
    cfg.validate()?;
    let mut vocab: Vec<String> = corpus
        .tweets()
        .iter()
        .flat_map(|t| t.tokens.iter().filter_map(lda_term))
        .collect();
    vocab.sort_unstable();
    vocab.dedup();
    let index: HashMap<String, u32> = vocab
        .iter()
        .enumerate()
        .map(|(i, w)| (w.clone(), i as u32))
        .collect();
    let docs: Vec<Vec<u32>> = corpus
        .tweets()
        .iter()
        .map(|t| t.tokens.iter().filter_map(lda_term).map(|w| index[&w]).collect())
        .collect();

    let (k, v) = (cfg.topics, vocab.len());
    let (alpha, beta) = (cfg.alpha(), cfg.beta);
    let vbeta = v as f64 * beta;
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, "lda:train"));
    let mut tw = vec![0u32; k * v];
    let mut tt = vec![0u32; k];
    let mut dt = vec![0u32; docs.len() * k];
    let mut z: Vec<Vec<u32>> = Vec::with_capacity(docs.len());
    for (d, doc) in docs.iter().enumerate() {
        let zs: Vec<u32> = doc.iter().map(|_| rng.gen_range(0..k as u32)).collect();
        for (&w, &t) in doc.iter().zip(&zs) {
            tw[t as usize * v + w as usize] += 1;
            tt[t as usize] += 1;
            dt[d * k + t as usize] += 1;
        }
        z.push(zs);
    }
    let mut p = vec![0.0; k];
    for _ in 0..cfg.train_sweeps {
        for (d, doc) in docs.iter().enumerate() {
            for (i, &w) in doc.iter().enumerate() {
                let w = w as usize;
                let old = z[d][i] as usize;
                tw[old * v + w] -= 1;
                tt[old] -= 1;
                dt[d * k + old] -= 1;
                let mut total = 0.0;
                for t in 0..k {
                    total += (f64::from(dt[d * k + t]) + alpha)
                        * (f64::from(tw[t * v + w]) + beta)
                        / (f64::from(tt[t]) + vbeta);
                    p[t] = total;
                }
                let new = sample_cumulative(&p, total, &mut rng);
                tw[new * v + w] += 1;
                tt[new] += 1;
                dt[d * k + new] += 1;
                z[d][i] = new as u32;
            }
        }
    }
    Ok(LdaModel {
        config: cfg.clone(),
        vocab,
        topic_word: tw,
        topic_total: tt,
        index,
    })
}

fn sample_cumulative(cum: &[f64], total: f64, rng: &mut ChaCha8Rng) -> usize {
    let u = rng.gen::<f64>() * total;
    cum.iter().position(|&c| u < c).unwrap_or(cum.len() - 1)
}

impl LdaModel {
    /// Restores the lookup table after deserialization.
    pub fn rebuild_index(&mut self) {
        self.index = self
            .vocab
            .iter()
            .enumerate()
            .map(|(i, w)| (w.clone(), i as u32))
            .collect();
    }

    pub fn topics(&self) -> usize {
        self.config.topics
    }

    /// Topic proportions for a bag of terms, by Gibbs fold-in against the
    /// frozen topic-word counts. The estimate is the mean of the
    /// per-sweep proportions after burn-in. Terms outside the vocabulary are
    /// dropped; nothing left gives the uniform distribution.
    pub fn infer(&self, terms: &[String], key: &str) -> Vec<f64> {
        let k = self.topics();
        let doc: Vec<usize> = terms
            .iter()
            .filter_map(|w| self.index.get(w).map(|&i| i as usize))
            .collect();
        if doc.is_empty() {
            return vec![1.0 / k as f64; k];
        }
        let v = self.vocab.len();
        let (alpha, beta) = (self.config.alpha(), self.config.beta);
        let vbeta = v as f64 * beta;
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(self.config.seed, &format!("lda:infer:{key}")));
        let mut z: Vec<usize> = doc.iter().map(|_| rng.gen_range(0..k)).collect();
        let mut dt = vec![0u32; k];
        for &t in &z {
            dt[t] += 1;
        }
        let denom = doc.len() as f64 + k as f64 * alpha;
        let mut theta = vec![0.0; k];
        let mut p = vec![0.0; k];
        for sweep in 0..self.config.infer_sweeps {
            for (i, &w) in doc.iter().enumerate() {
                dt[z[i]] -= 1;
                let mut total = 0.0;
                for t in 0..k {
                    total += (f64::from(dt[t]) + alpha)
                        * (f64::from(self.topic_word[t * v + w]) + beta)
                        / (f64::from(self.topic_total[t]) + vbeta);
                    p[t] = total;
                }
                z[i] = sample_cumulative(&p, total, &mut rng);
                dt[z[i]] += 1;
            }
            if sweep >= self.config.infer_burn_in {
                for t in 0..k {
                    theta[t] += (f64::from(dt[t]) + alpha) / denom;
                }
            }
        }
        let kept = (self.config.infer_sweeps - self.config.infer_burn_in) as f64;
        theta.iter_mut().for_each(|x| *x /= kept);
        // renormalize away accumulated rounding
        let s: f64 = theta.iter().sum();
        theta.iter_mut().for_each(|x| *x /= s);
        theta
    }
}

/// Topic proportions of a tweet; the fold-in seed depends on the model seed
/// and the tweet id, so repeated calls agree.
pub fn embed_lda(model: &LdaModel, tweet: &Tweet) -> Vec<f64> {
    let terms: Vec<String> = tweet.tokens.iter().filter_map(lda_term).collect();
    model.infer(&terms, &tweet.id)
}

impl TweetEmbedder for LdaModel {
    fn name(&self) -> &str {
        "LDA"
    }

    fn dim(&self) -> usize {
        self.topics()
    }

    fn embed_tweet(&self, tweet: &Tweet) -> Result<Embedding, EmbedError> {
        Ok(Embedding::Dense(embed_lda(self, tweet)))
    }

    fn embed_aux(&self, item: &AuxItem) -> Option<Embedding> {
        let terms: Vec<String> = item.words().iter().map(|w| w.to_lowercase()).collect();
        Some(Embedding::Dense(self.infer(&terms, &format!("aux:{}", terms.join(" ")))))
    }
}
