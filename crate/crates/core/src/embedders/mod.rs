//! Tweet and word representations.
//!
//! Native baselines (BOW TF-IDF, bag-of-means over word vectors, LDA topic
//! proportions), a seeded random control, and ingestion of embeddings that
//! were computed elsewhere through a plain-text interchange format.

mod bow;
mod external;
mod lda;
mod random;
mod wordvec;

pub use bow::{embed_bow, fit_bow, BowVocab, DEFAULT_BOW_K, DEFAULT_BOW_MAX_N};
pub use external::{length_oracle_table, load_external, read_external, write_external, EmbeddingTable};
pub use lda::{embed_lda, fit_lda, LdaConfig, LdaModel};
pub use random::RandomEmbedder;
pub use wordvec::{
    embed_bom, hashed_unit_vector, load_word_vectors, read_word_vectors, write_word_vectors,
    BomEmbedder, OovPolicy, WordVecStore,
};

use thiserror::Error;

use crate::corpus::Tweet;
use crate::taskgen::AuxItem;

#[derive(Debug, Error)]
pub enum EmbedError {
    #[error("corpus is empty")]
    EmptyCorpus,
    #[error("line {line}: expected dimension {expected}, found {found}")]
    DimMismatch {
        line: usize,
        expected: usize,
        found: usize,
    },
    #[error("line {line}: {reason}")]
    Malformed { line: usize, reason: String },
    #[error("header declares {declared} rows but {found} were read")]
    HeaderMismatch { declared: usize, found: usize },
    #[error("duplicate id {0:?}")]
    DuplicateId(String),
    #[error("no embedding for tweet {0:?}")]
    MissingId(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

/// A dense or sparse feature vector. Sparse entries are sorted by index.
#[derive(Debug, Clone, PartialEq)]
pub enum Embedding {
    Dense(Vec<f64>),
    Sparse(Vec<(u32, f64)>),
}

impl Embedding {
    pub fn norm(&self) -> f64 {
        match self {
            Embedding::Dense(v) => v.iter().map(|x| x * x).sum::<f64>().sqrt(),
            Embedding::Sparse(v) => v.iter().map(|(_, x)| x * x).sum::<f64>().sqrt(),
        }
    }

    pub fn to_dense(&self, dim: usize) -> Vec<f64> {
        match self {
            Embedding::Dense(v) => v.clone(),
            Embedding::Sparse(v) => {
                let mut out = vec![0.0; dim];
                for &(i, x) in v {
                    out[i as usize] = x;
                }
                out
            }
        }
    }

    fn dot(&self, other: &Embedding) -> f64 {
        match (self, other) {
            (Embedding::Dense(a), Embedding::Dense(b)) => a.iter().zip(b).map(|(x, y)| x * y).sum(),
            (Embedding::Sparse(a), Embedding::Sparse(b)) => {
                let (mut i, mut j, mut s) = (0, 0, 0.0);
                while i < a.len() && j < b.len() {
                    match a[i].0.cmp(&b[j].0) {
                        std::cmp::Ordering::Less => i += 1,
                        std::cmp::Ordering::Greater => j += 1,
                        std::cmp::Ordering::Equal => {
                            s += a[i].1 * b[j].1;
                            i += 1;
                            j += 1;
                        }
                    }
                }
                s
            }
            (Embedding::Dense(d), Embedding::Sparse(s)) | (Embedding::Sparse(s), Embedding::Dense(d)) => {
                s.iter().map(|&(i, x)| x * d[i as usize]).sum()
            }
        }
    }

    /// Cosine similarity; 0 when either side is the zero vector.
    pub fn cosine(&self, other: &Embedding) -> f64 {
        let n = self.norm() * other.norm();
        if n == 0.0 {
            0.0
        } else {
            self.dot(other) / n
        }
    }
}

/// A frozen tweet representation.
pub trait TweetEmbedder: Send + Sync {
    fn name(&self) -> &str;

    fn dim(&self) -> usize;

    fn embed_tweet(&self, tweet: &Tweet) -> Result<Embedding, EmbedError>;

    /// Embeds an auxiliary word or n-gram in the tweet space, for models
    /// that can represent arbitrary text. Tables of precomputed tweet
    /// vectors cannot and return `None`.
    fn embed_aux(&self, _item: &AuxItem) -> Option<Embedding> {
        None
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cosine_mixed_representations() {
        let d = Embedding::Dense(vec![1.0, 0.0, 2.0]);
        let s = Embedding::Sparse(vec![(0, 1.0), (2, 2.0)]);
        assert!((d.cosine(&s) - 1.0).abs() < 1e-12);
        assert!((s.cosine(&s) - 1.0).abs() < 1e-12);
        let z = Embedding::Sparse(vec![]);
        assert_eq!(z.cosine(&s), 0.0);
        assert_eq!(s.to_dense(3), vec![1.0, 0.0, 2.0]);
    }
}
