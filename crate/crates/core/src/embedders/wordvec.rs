use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::{EmbedError, Embedding, TweetEmbedder};
use crate::corpus::{TokenKind, Tweet};
use crate::hashing::fnv1a64;
use crate::taskgen::AuxItem;

/// What a lookup returns for words missing from the table.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OovPolicy {
    /// Unit vector drawn from a generator seeded by a stable hash of the word.
    #[default]
    HashedUnit,
    Zero,
}

/// Deterministic pseudo-random unit vector for `word`.
pub fn hashed_unit_vector(word: &str, dim: usize) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(fnv1a64(word.as_bytes()));
    loop {
        let v: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(&mut rng)).collect();
        let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if n > 0.0 {
            return v.into_iter().map(|x| x / n).collect();
        }
    }
}

/// Word vectors keyed by surface form.
#[derive(Debug, Clone, PartialEq)]
pub struct WordVecStore {
    dim: usize,
    vectors: HashMap<String, Vec<f64>>,
    /// lowercase form -> first stored word with that form
    folded: HashMap<String, String>,
    order: Vec<String>,
    pub oov_policy: OovPolicy,
}

impl WordVecStore {
    /// A store with no vectors: every lookup goes through the OOV policy.
    pub fn empty(dim: usize) -> Self {
        WordVecStore {
            dim,
            vectors: HashMap::new(),
            folded: HashMap::new(),
            order: Vec::new(),
            oov_policy: OovPolicy::default(),
        }
    }

    pub fn insert(&mut self, word: impl Into<String>, vector: Vec<f64>) -> Result<(), EmbedError> {
        let word = word.into();
        if vector.len() != self.dim {
            return Err(EmbedError::DimMismatch {
                line: self.order.len() + 1,
                expected: self.dim,
                found: vector.len(),
            });
        }
        if self.vectors.contains_key(&word) {
            return Err(EmbedError::DuplicateId(word));
        }
        self.folded.entry(word.to_lowercase()).or_insert_with(|| word.clone());
        self.order.push(word.clone());
        self.vectors.insert(word, vector);
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }

    /// Stored vector for an exact or case-folded match.
    pub fn get(&self, word: &str) -> Option<&[f64]> {
        self.vectors
            .get(word)
            .or_else(|| {
                self.folded
                    .get(&word.to_lowercase())
                    .and_then(|w| self.vectors.get(w))
            })
            .map(Vec::as_slice)
    }

    /// Exact lookup, then case-folded lookup, then the OOV policy.
    pub fn word_embedding(&self, word: &str) -> Vec<f64> {
        match self.get(word) {
            Some(v) => v.to_vec(),
            None => match self.oov_policy {
                OovPolicy::HashedUnit => hashed_unit_vector(word, self.dim),
                OovPolicy::Zero => vec![0.0; self.dim],
            },
        }
    }

    /// Words embed directly; n-grams as the mean of their member words.
    pub fn aux_embedding(&self, item: &AuxItem) -> Vec<f64> {
        let words = item.words();
        let mut acc = vec![0.0; self.dim];
        for w in &words {
            for (a, x) in acc.iter_mut().zip(self.word_embedding(w)) {
                *a += x;
            }
        }
        if !words.is_empty() {
            let n = words.len() as f64;
            acc.iter_mut().for_each(|a| *a /= n);
        }
        acc
    }

    pub fn words(&self) -> impl Iterator<Item = &str> {
        self.order.iter().map(String::as_str)
    }
}

fn parse_row(line: &str, lineno: usize) -> Result<(String, Vec<f64>), EmbedError> {
    let mut parts = line.split(' ');
    let word = parts.next().filter(|w| !w.is_empty()).ok_or(EmbedError::Malformed {
        line: lineno,
        reason: "missing word".into(),
    })?;
    let values = parts
        .map(|p| {
            p.parse::<f64>().map_err(|_| EmbedError::Malformed {
                line: lineno,
                reason: format!("bad number {p:?}"),
            })
        })
        .collect::<Result<Vec<f64>, _>>()?;
    if values.is_empty() {
        return Err(EmbedError::Malformed {
            line: lineno,
            reason: "no vector components".into(),
        });
    }
    Ok((word.to_string(), values))
}

/// Reads a GloVe-style text file: `word v1 ... vd` per line. The dimension
/// is taken from the first row.
pub fn read_word_vectors<R: BufRead>(reader: R) -> Result<WordVecStore, EmbedError> {
    let mut store: Option<WordVecStore> = None;
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        let line = line.trim_end_matches('\r');
        if line.is_empty() {
            continue;
        }
        let (word, v) = parse_row(line, i + 1)?;
        let s = store.get_or_insert_with(|| WordVecStore::empty(v.len()));
        if v.len() != s.dim {
            return Err(EmbedError::DimMismatch {
                line: i + 1,
                expected: s.dim,
                found: v.len(),
            });
        }
        s.insert(word, v).map_err(|e| match e {
            EmbedError::DuplicateId(w) => EmbedError::Malformed {
                line: i + 1,
                reason: format!("duplicate word {w:?}"),
            },
            other => other,
        })?;
    }
    store.ok_or(EmbedError::Malformed {
        line: 0,
        reason: "no vectors".into(),
    })
}

pub fn load_word_vectors(path: impl AsRef<Path>) -> Result<WordVecStore, EmbedError> {
    read_word_vectors(BufReader::new(File::open(path)?))
}

pub fn write_word_vectors<W: Write>(store: &WordVecStore, mut out: W) -> std::io::Result<()> {
    for w in &store.order {
        out.write_all(w.as_bytes())?;
        for x in &store.vectors[w] {
            write!(out, " {x}")?;
        }
        out.write_all(b"\n")?;
    }
    Ok(())
}

/// Bag-of-means: average word vector over Word, Hashtag (without `#`) and
/// Number tokens; the zero vector when there are none.
pub fn embed_bom(store: &WordVecStore, tweet: &Tweet) -> Vec<f64> {
    let mut acc = vec![0.0; store.dim];
    let mut n = 0usize;
    for t in &tweet.tokens {
        if matches!(t.kind, TokenKind::Word | TokenKind::Hashtag | TokenKind::Number) {
            for (a, x) in acc.iter_mut().zip(store.word_embedding(t.stripped())) {
                *a += x;
            }
            n += 1;
        }
    }
    if n > 0 {
        acc.iter_mut().for_each(|a| *a /= n as f64);
    }
    acc
}

/// [`TweetEmbedder`] adapter for bag-of-means.
#[derive(Debug, Clone)]
pub struct BomEmbedder<'a> {
    pub store: &'a WordVecStore,
}

impl TweetEmbedder for BomEmbedder<'_> {
    fn name(&self) -> &str {
        "BOM"
    }

    fn dim(&self) -> usize {
        self.store.dim
    }

    fn embed_tweet(&self, tweet: &Tweet) -> Result<Embedding, EmbedError> {
        Ok(Embedding::Dense(embed_bom(self.store, tweet)))
    }

    fn embed_aux(&self, item: &AuxItem) -> Option<Embedding> {
        Some(Embedding::Dense(self.store.aux_embedding(item)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::seq::SliceRandom;
    use rand::Rng;

    fn store2() -> WordVecStore {
        read_word_vectors("a 1 0\nb 0 1\nHello 2 2\n".as_bytes()).unwrap()
    }

    #[test]
    fn infers_dim() {
        let s = read_word_vectors("x 1 2 3\ny 4 5 6\n".as_bytes()).unwrap();
        assert_eq!(s.dim(), 3);
        assert_eq!(s.len(), 2);
    }

    #[test]
    fn wrong_arity_is_dim_mismatch() {
        assert!(matches!(
            read_word_vectors("x 1 2 3\ny 4 5\n".as_bytes()),
            Err(EmbedError::DimMismatch { line: 2, expected: 3, found: 2 })
        ));
        assert!(matches!(
            read_word_vectors("x 1 two\n".as_bytes()),
            Err(EmbedError::Malformed { line: 1, .. })
        ));
    }

    #[test]
    fn reload_round_trip() {
        let mut s = WordVecStore::empty(3);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for i in 0..50 {
            s.insert(format!("w{i}"), (0..3).map(|_| rng.gen::<f64>() - 0.5).collect())
                .unwrap();
        }
        let mut buf = Vec::new();
        write_word_vectors(&s, &mut buf).unwrap();
        assert_eq!(read_word_vectors(buf.as_slice()).unwrap(), s);
    }

    #[test]
    fn lookup_order_and_oov() {
        let s = store2();
        assert_eq!(s.word_embedding("a"), vec![1.0, 0.0]);
        assert_eq!(s.word_embedding("HELLO"), vec![2.0, 2.0]);
        let oov = s.word_embedding("zebra");
        assert_eq!(oov, s.word_embedding("zebra"));
        let n: f64 = oov.iter().map(|x| x * x).sum::<f64>().sqrt();
        assert!((n - 1.0).abs() < 1e-9);
        let mut z = store2();
        z.oov_policy = OovPolicy::Zero;
        assert_eq!(z.word_embedding("zebra"), vec![0.0, 0.0]);
    }

    #[test]
    fn ngram_aux_is_mean() {
        let s = store2();
        let v = s.aux_embedding(&AuxItem::Ngram(vec!["a".into(), "b".into()]));
        assert_eq!(v, vec![0.5, 0.5]);
    }

    #[test]
    fn bom_examples() {
        let s = store2();
        assert_eq!(embed_bom(&s, &Tweet::new("t", "a b")), vec![0.5, 0.5]);
        assert_eq!(embed_bom(&s, &Tweet::new("t", "a")), vec![1.0, 0.0]);
        assert_eq!(embed_bom(&s, &Tweet::new("t", "#b !")), vec![0.0, 1.0]);
        assert_eq!(embed_bom(&s, &Tweet::new("t", "")), vec![0.0, 0.0]);
    }

    proptest! {
        #[test]
        fn bom_is_mean_permutation_invariant_and_linear(seed in any::<u64>(), len in 1usize..12) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut s = WordVecStore::empty(4);
            let mut doubled = WordVecStore::empty(4);
            for i in 0..10 {
                let v: Vec<f64> = (0..4).map(|_| rng.gen::<f64>() * 2.0 - 1.0).collect();
                doubled.insert(format!("w{i}"), v.iter().map(|x| 2.0 * x).collect()).unwrap();
                s.insert(format!("w{i}"), v).unwrap();
            }
            let mut words: Vec<String> = (0..len).map(|_| format!("w{}", rng.gen_range(0..10))).collect();
            let e = embed_bom(&s, &Tweet::new("t", words.join(" ")));
            let mut brute = [0.0; 4];
            for w in &words {
                for (b, x) in brute.iter_mut().zip(s.get(w).unwrap()) {
                    *b += x / len as f64;
                }
            }
            for (a, b) in e.iter().zip(brute) {
                prop_assert!((a - b).abs() < 1e-12);
            }
            let d = embed_bom(&doubled, &Tweet::new("t", words.join(" ")));
            for (a, b) in e.iter().zip(&d) {
                prop_assert!((2.0 * a - b).abs() < 1e-12);
            }
            words.shuffle(&mut rng);
            let p = embed_bom(&s, &Tweet::new("t", words.join(" ")));
            for (a, b) in e.iter().zip(&p) {
                prop_assert!((a - b).abs() < 1e-12);
            }
        }
    }
}
