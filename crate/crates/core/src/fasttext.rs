//! FastText-style supervised baseline: hashed word and n-gram buckets, a
//! learned embedding table averaged into one vector, then a linear softmax.
//! Auxiliary inputs enter as extra tokens carrying a slot marker.

use std::collections::BTreeMap;
use std::io::{BufRead, Write};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{Corpus, Tweet};
use crate::hashing::{config_hash, derive_seed, fnv1a64};
use crate::probe::{
    argmax, check_labels, compute_metrics, read_rows, softmax, write_rows, Adam, EpochRecord, Metrics, ModelHeader,
    ProbeError, TrainConfig,
};
use crate::taskgen::{AuxItem, TaskDataset};

pub const DEFAULT_BUCKETS: usize = 1 << 16;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FtConfig {
    pub buckets: usize,
    pub dim: usize,
    pub max_n: usize,
    pub train: TrainConfig,
}

impl Default for FtConfig {
    fn default() -> Self {
        FtConfig {
            buckets: DEFAULT_BUCKETS,
            dim: 10,
            max_n: 2,
            train: TrainConfig::default(),
        }
    }
}

impl FtConfig {
    pub fn validate(&self) -> Result<(), ProbeError> {
        if self.buckets == 0 || self.buckets > u32::MAX as usize || self.dim == 0 || self.max_n == 0 {
            return Err(ProbeError::InvalidConfig(
                "buckets, dim and max_n must be positive".into(),
            ));
        }
        self.train.validate()
    }
}

/// Bucket of a surface string: FNV-1a 64 modulo the bucket count.
pub fn bucket_of(surface: &str, buckets: usize) -> u32 {
    (fnv1a64(surface.as_bytes()) % buckets as u64) as u32
}

/// Marker prepended to aux surfaces so each slot hashes apart from tweet
/// tokens and from the other slot.
pub fn aux_surface(slot: usize, item: &AuxItem) -> String {
    format!("\u{1}aux{slot}:{}", item.words().join(" "))
}

/// Bucket indices for a tweet's word n-grams (n <= max_n over Word,
/// Hashtag, Mention and Number tokens) followed by the marked aux items.
pub fn featurize_ft(cfg: &FtConfig, tweet: &Tweet, aux: &[AuxItem]) -> Vec<u32> {
    let words: Vec<&str> = tweet
        .tokens
        .iter()
        .filter(|t| t.kind.is_wordlike())
        .map(|t| t.surface.as_str())
        .collect();
    let mut out = Vec::new();
    for n in 1..=cfg.max_n {
        for w in words.windows(n) {
            out.push(bucket_of(&w.join(" "), cfg.buckets));
        }
    }
    for (slot, item) in aux.iter().enumerate() {
        out.push(bucket_of(&aux_surface(slot, item), cfg.buckets));
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct FtModel {
    pub config: FtConfig,
    pub class_count: usize,
    /// `buckets x dim`, row-major.
    pub embeddings: Vec<f64>,
    /// `class_count x dim`, row-major.
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct FtOutcome {
    pub model: FtModel,
    pub history: Vec<EpochRecord>,
    pub best_epoch: usize,
}

#[derive(Debug, Default)]
struct Grad {
    rows: BTreeMap<u32, Vec<f64>>,
    weights: Vec<f64>,
    bias: Vec<f64>,
}

impl FtModel {
    /// Embedding table uniform in (-1/dim, 1/dim), output layer zero.
    pub fn init(config: FtConfig, class_count: usize) -> Self {
        let d = config.dim;
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(config.train.seed, "ft:init"));
        let r = 1.0 / d as f64;
        let embeddings = (0..config.buckets * d).map(|_| rng.gen_range(-r..r)).collect();
        FtModel {
            class_count,
            embeddings,
            weights: vec![0.0; class_count * d],
            bias: vec![0.0; class_count],
            config,
        }
    }

    fn hidden(&self, doc: &[u32]) -> Vec<f64> {
        let d = self.config.dim;
        let mut h = vec![0.0; d];
        if doc.is_empty() {
            return h;
        }
        for &i in doc {
            let row = &self.embeddings[i as usize * d..(i as usize + 1) * d];
            for (a, x) in h.iter_mut().zip(row) {
                *a += x;
            }
        }
        let n = doc.len() as f64;
        h.iter_mut().for_each(|a| *a /= n);
        h
    }

    fn logits(&self, h: &[f64]) -> Vec<f64> {
        let d = self.config.dim;
        (0..self.class_count)
            .map(|c| {
                let row = &self.weights[c * d..(c + 1) * d];
                self.bias[c] + row.iter().zip(h).map(|(w, x)| w * x).sum::<f64>()
            })
            .collect()
    }

    /// Class probabilities for a bucket list; empty lists use the bias only.
    pub fn probabilities(&self, doc: &[u32]) -> Vec<f64> {
        let mut p = self.logits(&self.hidden(doc));
        softmax(&mut p);
        p
    }

    pub fn predict_doc(&self, doc: &[u32]) -> usize {
        argmax(&self.logits(&self.hidden(doc)))
    }

    pub fn predict(&self, tweet: &Tweet, aux: &[AuxItem]) -> (usize, Vec<f64>) {
        let doc = featurize_ft(&self.config, tweet, aux);
        let z = self.logits(&self.hidden(&doc));
        let label = argmax(&z);
        let mut p = z;
        softmax(&mut p);
        (label, p)
    }

    fn objective(&self, docs: &[Vec<u32>], labels: &[usize], rows: &[usize], grad: Option<&mut Grad>) -> f64 {
        let (c, d) = (self.class_count, self.config.dim);
        let l2 = self.config.train.l2;
        let n = rows.len() as f64;
        let mut loss = 0.0;
        let mut grad = grad;
        if let Some(g) = grad.as_deref_mut() {
            g.rows.clear();
            g.weights = self.weights.iter().map(|w| l2 * w).collect();
            g.bias = vec![0.0; c];
        }
        for &r in rows {
            let doc = &docs[r];
            let h = self.hidden(doc);
            let mut p = self.logits(&h);
            softmax(&mut p);
            let y = labels[r];
            loss -= p[y].max(f64::MIN_POSITIVE).ln();
            if let Some(g) = grad.as_deref_mut() {
                let mut dh = vec![0.0; d];
                for k in 0..c {
                    let e = (p[k] - if k == y { 1.0 } else { 0.0 }) / n;
                    let wr = &self.weights[k * d..(k + 1) * d];
                    let gw = &mut g.weights[k * d..(k + 1) * d];
                    for j in 0..d {
                        gw[j] += e * h[j];
                        dh[j] += e * wr[j];
                    }
                    g.bias[k] += e;
                }
                if !doc.is_empty() {
                    let share = 1.0 / doc.len() as f64;
                    for &i in doc {
                        let row = g.rows.entry(i).or_insert_with(|| vec![0.0; d]);
                        for (a, x) in row.iter_mut().zip(&dh) {
                            *a += x * share;
                        }
                    }
                }
            }
        }
        loss / n + 0.5 * l2 * self.weights.iter().map(|w| w * w).sum::<f64>()
    }

    /// Parameter `k` in the order embeddings, weights, bias.
    fn param_mut(&mut self, k: usize) -> &mut f64 {
        let (ne, nw) = (self.embeddings.len(), self.weights.len());
        if k < ne {
            &mut self.embeddings[k]
        } else if k < ne + nw {
            &mut self.weights[k - ne]
        } else {
            &mut self.bias[k - ne - nw]
        }
    }

    pub fn write<W: Write>(&self, out: W) -> std::io::Result<()> {
        let header = ModelHeader {
            kind: "fasttext".into(),
            class_count: self.class_count,
            feature_dim: self.config.dim,
            seed: self.config.train.seed,
            config_hash: config_hash(&self.config),
            extra: serde_json::json!({
                "hash": "fnv1a64",
                "config": self.config,
            }),
        };
        let d = self.config.dim;
        let mut extra: Vec<&[f64]> = vec![&self.bias];
        extra.extend(self.embeddings.chunks(d));
        write_rows(out, &header, &self.weights, d, &extra)
    }

    pub fn read<R: BufRead>(mut reader: R) -> Result<Self, ProbeError> {
        let mut first = String::new();
        reader.read_line(&mut first)?;
        let header: ModelHeader =
            serde_json::from_str(&first).map_err(|e| ProbeError::Malformed(format!("header: {e}")))?;
        let config: FtConfig = serde_json::from_value(header.extra["config"].clone())
            .map_err(|e| ProbeError::Malformed(format!("config: {e}")))?;
        config.validate()?;
        let (header, mut blocks) = read_rows(std::io::Read::chain(first.as_bytes(), reader), "fasttext", 1 + config.buckets)?;
        let weights = blocks.remove(0);
        let bias = blocks.remove(0);
        if bias.len() != header.class_count || blocks.iter().any(|r| r.len() != config.dim) {
            return Err(ProbeError::Malformed("parameter shapes disagree with header".into()));
        }
        Ok(FtModel {
            class_count: header.class_count,
            embeddings: blocks.concat(),
            weights,
            bias,
            config,
        })
    }
}

fn documents(dataset: &TaskDataset, corpus: &Corpus, cfg: &FtConfig) -> Result<Vec<Vec<u32>>, ProbeError> {
    dataset
        .instances
        .iter()
        .map(|inst| {
            corpus
                .get(&inst.tweet_id)
                .map(|t| featurize_ft(cfg, t, &inst.aux))
                .ok_or_else(|| ProbeError::MissingTweetEmbedding(inst.tweet_id.clone()))
        })
        .collect()
}

/// Trains embeddings and output layer jointly with the probe's optimizer
/// contract. Embedding rows get lazy Adam updates: only rows touched by
/// the batch move.
pub fn train_ft(dataset: &TaskDataset, corpus: &Corpus, cfg: &FtConfig) -> Result<FtOutcome, ProbeError> {
    cfg.validate()?;
    let labels = dataset.labels();
    let c = dataset.class_count;
    check_labels(&labels, &dataset.splits.train, c)?;
    let docs = documents(dataset, corpus, cfg)?;
    let t = &cfg.train;
    let d = cfg.dim;
    let mut model = FtModel::init(cfg.clone(), c);
    let mut emb_opt = Adam::new(model.embeddings.len(), t.learning_rate, t.beta1, t.beta2, t.epsilon);
    let mut out_opt = Adam::new(c * d + c, t.learning_rate, t.beta1, t.beta2, t.epsilon);
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(t.seed, "ft:shuffle"));
    let splits = &dataset.splits;
    let val_rows = if splits.val.is_empty() { &splits.train } else { &splits.val };
    let val_gold: Vec<usize> = val_rows.iter().map(|&i| labels[i]).collect();
    let mut order = splits.train.clone();
    let mut grad = Grad::default();
    let mut history = Vec::new();
    let mut best = (f64::NEG_INFINITY, f64::INFINITY, 0usize, model.clone());
    for epoch in 1..=t.max_epochs {
        order.shuffle(&mut rng);
        for batch in order.chunks(t.batch_size) {
            let loss = model.objective(&docs, &labels, batch, Some(&mut grad));
            if !loss.is_finite() {
                return Err(ProbeError::NonFiniteLoss { epoch });
            }
            emb_opt.begin_step();
            for (&i, g) in &grad.rows {
                let base = i as usize * d;
                for (j, &gj) in g.iter().enumerate() {
                    emb_opt.update(base + j, &mut model.embeddings[base + j], gj);
                }
            }
            out_opt.begin_step();
            for (k, &g) in grad.weights.iter().enumerate() {
                out_opt.update(k, &mut model.weights[k], g);
            }
            for (k, &g) in grad.bias.iter().enumerate() {
                out_opt.update(c * d + k, &mut model.bias[k], g);
            }
        }
        let train_loss = model.objective(&docs, &labels, &splits.train, None);
        if !train_loss.is_finite() {
            return Err(ProbeError::NonFiniteLoss { epoch });
        }
        let val_loss = model.objective(&docs, &labels, val_rows, None);
        let pred: Vec<usize> = val_rows.iter().map(|&r| model.predict_doc(&docs[r])).collect();
        let f1 = compute_metrics(&val_gold, &pred, c, &[]).macro_f1;
        history.push(EpochRecord {
            epoch,
            train_loss,
            val_loss,
            val_macro_f1: f1,
        });
        if f1 > best.0 || (f1 == best.0 && val_loss < best.1) {
            best = (f1, val_loss, epoch, model.clone());
        } else if epoch - best.2 >= t.patience {
            break;
        }
    }
    Ok(FtOutcome {
        model: best.3,
        history,
        best_epoch: best.2,
    })
}

/// Scores a trained model on the given instance indices (all when `None`).
pub fn evaluate_ft(
    model: &FtModel,
    dataset: &TaskDataset,
    corpus: &Corpus,
    rows: Option<&[usize]>,
) -> Result<Metrics, ProbeError> {
    let docs = documents(dataset, corpus, &model.config)?;
    let all: Vec<usize>;
    let rows = match rows {
        Some(r) => r,
        None => {
            all = (0..docs.len()).collect();
            &all
        }
    };
    let pred: Vec<usize> = rows.iter().map(|&r| model.predict_doc(&docs[r])).collect();
    let gold: Vec<usize> = rows.iter().map(|&r| dataset.instances[r].label).collect();
    let ids: Vec<String> = rows.iter().map(|&r| dataset.instances[r].tweet_id.clone()).collect();
    Ok(compute_metrics(&gold, &pred, model.class_count, &ids))
}

/// Finite-difference check of the full FastText objective (embeddings,
/// output weights and bias) on a random problem: 16 buckets, dim 4, 3
/// classes, 20 documents. Same error measure as the probe check.
pub fn ft_gradient_check(seed: u64, corrupt: bool) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (b, d, c, n) = (16usize, 4usize, 3usize, 20usize);
    let cfg = FtConfig {
        buckets: b,
        dim: d,
        max_n: 1,
        train: TrainConfig {
            l2: 1e-2,
            seed,
            ..TrainConfig::default()
        },
    };
    let mut m = FtModel::init(cfg, c);
    m.embeddings.iter_mut().for_each(|x| *x = rng.gen_range(-1.0..1.0));
    m.weights.iter_mut().for_each(|x| *x = rng.gen_range(-1.0..1.0));
    m.bias.iter_mut().for_each(|x| *x = rng.gen_range(-1.0..1.0));
    let docs: Vec<Vec<u32>> = (0..n)
        .map(|_| (0..rng.gen_range(1..6)).map(|_| rng.gen_range(0..b as u32)).collect())
        .collect();
    let labels: Vec<usize> = (0..n).map(|_| rng.gen_range(0..c)).collect();
    let rows: Vec<usize> = (0..n).collect();
    let mut g = Grad::default();
    m.objective(&docs, &labels, &rows, Some(&mut g));
    let mut analytic = vec![0.0; b * d];
    for (&i, row) in &g.rows {
        analytic[i as usize * d..(i as usize + 1) * d].copy_from_slice(row);
    }
    analytic.extend(&g.weights);
    analytic.extend(&g.bias);
    if corrupt {
        let k = argmax(&analytic.iter().map(|x| x.abs()).collect::<Vec<_>>());
        analytic[k] = -analytic[k];
    }
    let h = 1e-5;
    let mut worst: f64 = 0.0;
    for k in 0..analytic.len() {
        let orig = *m.param_mut(k);
        *m.param_mut(k) = orig + h;
        let fp = m.objective(&docs, &labels, &rows, None);
        *m.param_mut(k) = orig - h;
        let fm = m.objective(&docs, &labels, &rows, None);
        *m.param_mut(k) = orig;
        let num = (fp - fm) / (2.0 * h);
        let a = analytic[k];
        worst = worst.max((a - num).abs() / (a.abs() + num.abs()).max(1e-6));
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn featurize_is_deterministic_and_marks_aux() {
        let cfg = FtConfig::default();
        let t = Tweet::new("a", "good morning all");
        let f = featurize_ft(&cfg, &t, &[]);
        assert_eq!(f.len(), 3 + 2);
        assert_eq!(f, featurize_ft(&cfg, &t, &[]));
        let a = featurize_ft(&cfg, &t, &[AuxItem::Word("good".into())]);
        assert_eq!(a.len(), 6);
        assert_ne!(a[5], bucket_of("good", cfg.buckets));
        assert!(featurize_ft(&cfg, &Tweet::new("e", ""), &[]).is_empty());
    }

    #[test]
    fn zero_parameters_are_uniform() {
        let mut m = FtModel::init(FtConfig { buckets: 8, dim: 3, ..FtConfig::default() }, 4);
        m.embeddings.iter_mut().for_each(|x| *x = 0.0);
        assert_eq!(m.probabilities(&[1, 2]), vec![0.25; 4]);
        assert_eq!(m.probabilities(&[]), vec![0.25; 4]);
    }

    #[test]
    fn gradient_is_correct() {
        for s in 0..3 {
            assert!(ft_gradient_check(s, false) < 1e-4);
        }
        assert!(ft_gradient_check(0, true) > 1e-2);
    }

    #[test]
    fn text_round_trip() {
        let cfg = FtConfig {
            buckets: 4,
            dim: 2,
            ..FtConfig::default()
        };
        let m = FtModel::init(cfg, 3);
        let mut buf = Vec::new();
        m.write(&mut buf).unwrap();
        assert_eq!(FtModel::read(buf.as_slice()).unwrap(), m);
    }
}
