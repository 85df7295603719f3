use std::collections::HashMap;

use super::ProbeError;
use crate::corpus::Corpus;
use crate::embedders::{Embedding, RandomEmbedder, TweetEmbedder, WordVecStore};
use crate::taskgen::TaskDataset;

/// Row-compressed feature matrix. Dense rows are stored with every index.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    pub n_cols: usize,
    indptr: Vec<usize>,
    indices: Vec<u32>,
    values: Vec<f64>,
}

impl FeatureMatrix {
    pub fn new(n_cols: usize) -> Self {
        FeatureMatrix {
            n_cols,
            indptr: vec![0],
            indices: Vec::new(),
            values: Vec::new(),
        }
    }

    pub fn from_dense(rows: &[Vec<f64>]) -> Self {
        let n_cols = rows.first().map_or(0, Vec::len);
        let mut m = FeatureMatrix::new(n_cols);
        for r in rows {
            assert_eq!(r.len(), n_cols, "ragged rows");
            m.push_dense(r, 0);
            m.finish_row();
        }
        m
    }

    fn push_dense(&mut self, v: &[f64], offset: usize) {
        for (j, &x) in v.iter().enumerate() {
            self.indices.push((offset + j) as u32);
            self.values.push(x);
        }
    }

    fn push(&mut self, e: &Embedding, offset: usize) {
        match e {
            Embedding::Dense(v) => self.push_dense(v, offset),
            Embedding::Sparse(v) => {
                for &(j, x) in v {
                    self.indices.push(offset as u32 + j);
                    self.values.push(x);
                }
            }
        }
    }

    fn finish_row(&mut self) {
        self.indptr.push(self.indices.len());
    }

    pub fn n_rows(&self) -> usize {
        self.indptr.len() - 1
    }

    pub fn row(&self, i: usize) -> (&[u32], &[f64]) {
        let (a, b) = (self.indptr[i], self.indptr[i + 1]);
        (&self.indices[a..b], &self.values[a..b])
    }

    /// Applies `f(column, value)` to every stored value.
    pub(crate) fn map_values(&mut self, f: impl Fn(usize, f64) -> f64) {
        for (j, v) in self.indices.iter().zip(self.values.iter_mut()) {
            *v = f(*j as usize, *v);
        }
    }

    pub fn dense_row(&self, i: usize) -> Vec<f64> {
        let mut out = vec![0.0; self.n_cols];
        let (idx, val) = self.row(i);
        for (&j, &x) in idx.iter().zip(val) {
            out[j as usize] = x;
        }
        out
    }
}

/// Where auxiliary word/n-gram inputs get their vectors.
#[derive(Debug, Clone, Copy)]
pub enum AuxSource<'a> {
    Words(&'a WordVecStore),
    /// Content-free vectors keyed by (tweet id, slot, instance index). Used
    /// with the random tweet embedder as a chance-level control.
    Random { dim: usize, seed: u64 },
}

impl AuxSource<'_> {
    pub fn dim(&self) -> usize {
        match self {
            AuxSource::Words(s) => s.dim(),
            AuxSource::Random { dim, .. } => *dim,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FeatureSpec {
    /// Append one cosine per aux item between the tweet embedding and the
    /// item embedded by the tweet model itself, when the model supports it.
    pub aux_match: bool,
}

impl Default for FeatureSpec {
    fn default() -> Self {
        FeatureSpec { aux_match: true }
    }
}

/// Feature rows with their labels and tweet ids, in dataset order.
#[derive(Debug, Clone, PartialEq)]
pub struct Features {
    pub matrix: FeatureMatrix,
    pub labels: Vec<usize>,
    pub ids: Vec<String>,
}

/// Builds one row per instance: tweet embedding, then each aux embedding,
/// then (optionally) the aux-match cosines.
pub fn assemble_features(
    dataset: &TaskDataset,
    corpus: &Corpus,
    tweets: &dyn TweetEmbedder,
    aux: AuxSource<'_>,
    spec: FeatureSpec,
) -> Result<Features, ProbeError> {
    let arity = dataset.kind.arity();
    let tdim = tweets.dim();
    let adim = aux.dim();
    let probe_aux = dataset.instances.iter().find_map(|i| i.aux.first());
    let matching = spec.aux_match && arity > 0 && probe_aux.is_some_and(|a| tweets.embed_aux(a).is_some());
    let n_cols = tdim + arity * adim + if matching { arity } else { 0 };
    let mut m = FeatureMatrix::new(n_cols);
    let mut cache: HashMap<&str, Embedding> = HashMap::new();
    let random = match aux {
        AuxSource::Random { dim, seed } => Some(RandomEmbedder::new(dim, seed)),
        AuxSource::Words(_) => None,
    };
    for (n, inst) in dataset.instances.iter().enumerate() {
        if !cache.contains_key(inst.tweet_id.as_str()) {
            let tweet = corpus
                .get(&inst.tweet_id)
                .ok_or_else(|| ProbeError::MissingTweetEmbedding(inst.tweet_id.clone()))?;
            let e = tweets.embed_tweet(tweet).map_err(|e| match e {
                crate::embedders::EmbedError::MissingId(id) => ProbeError::MissingTweetEmbedding(id),
                other => ProbeError::Embed(other),
            })?;
            let d = match &e {
                Embedding::Dense(v) => v.len(),
                Embedding::Sparse(v) => v.last().map_or(0, |&(j, _)| j as usize + 1),
            };
            if d > tdim || (matches!(e, Embedding::Dense(_)) && d != tdim) {
                return Err(ProbeError::Shape(format!(
                    "tweet {} embeds to dim {d}, expected {tdim}",
                    inst.tweet_id
                )));
            }
            cache.insert(inst.tweet_id.as_str(), e);
        }
        if inst.aux.len() != arity {
            return Err(ProbeError::Shape(format!(
                "instance {n} has {} aux items, task arity is {arity}",
                inst.aux.len()
            )));
        }
        let te = &cache[inst.tweet_id.as_str()];
        m.push(te, 0);
        for (slot, item) in inst.aux.iter().enumerate() {
            let v = match (&aux, &random) {
                (AuxSource::Words(store), _) => store.aux_embedding(item),
                (_, Some(r)) => r.vector(&format!("aux:{}:{slot}:{n}", inst.tweet_id)),
                _ => unreachable!(),
            };
            m.push_dense(&v, tdim + slot * adim);
        }
        if matching {
            for (slot, item) in inst.aux.iter().enumerate() {
                let c = tweets.embed_aux(item).map_or(0.0, |a| te.cosine(&a));
                m.indices.push((tdim + arity * adim + slot) as u32);
                m.values.push(c);
            }
        }
        m.finish_row();
    }
    Ok(Features {
        matrix: m,
        labels: dataset.labels(),
        ids: dataset.instances.iter().map(|i| i.tweet_id.clone()).collect(),
    })
}
