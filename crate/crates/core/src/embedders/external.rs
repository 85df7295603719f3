use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use indexmap::IndexMap;

use super::{EmbedError, Embedding, TweetEmbedder};
use crate::corpus::{Corpus, Tweet};

/// Precomputed tweet vectors keyed by tweet id.
///
/// Text format: a header line `<count> <dim>`, then one line per tweet,
/// `<tweet_id> v1 ... vd`, space separated. Values are written in shortest
/// round-trip form so a write/read cycle is exact.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingTable {
    pub name: String,
    dim: usize,
    rows: IndexMap<String, Vec<f64>>,
}

impl EmbeddingTable {
    pub fn new(name: impl Into<String>, dim: usize) -> Self {
        EmbeddingTable {
            name: name.into(),
            dim,
            rows: IndexMap::new(),
        }
    }

    pub fn insert(&mut self, id: impl Into<String>, v: Vec<f64>) -> Result<(), EmbedError> {
        let id = id.into();
        if v.len() != self.dim {
            return Err(EmbedError::DimMismatch {
                line: self.rows.len() + 2,
                expected: self.dim,
                found: v.len(),
            });
        }
        if self.rows.contains_key(&id) {
            return Err(EmbedError::DuplicateId(id));
        }
        self.rows.insert(id, v);
        Ok(())
    }

    pub fn get(&self, id: &str) -> Option<&[f64]> {
        self.rows.get(id).map(Vec::as_slice)
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &[f64])> {
        self.rows.iter().map(|(k, v)| (k.as_str(), v.as_slice()))
    }
}

impl TweetEmbedder for EmbeddingTable {
    fn name(&self) -> &str {
        &self.name
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn embed_tweet(&self, tweet: &Tweet) -> Result<Embedding, EmbedError> {
        self.get(&tweet.id)
            .map(|v| Embedding::Dense(v.to_vec()))
            .ok_or_else(|| EmbedError::MissingId(tweet.id.clone()))
    }
}

fn malformed(line: usize, reason: impl Into<String>) -> EmbedError {
    EmbedError::Malformed {
        line,
        reason: reason.into(),
    }
}

pub fn read_external<R: BufRead>(name: &str, reader: R) -> Result<EmbeddingTable, EmbedError> {
    let mut lines = reader.lines();
    let header = lines.next().ok_or_else(|| malformed(1, "missing header"))??;
    let mut h = header.split_whitespace();
    let parse_usize = |s: Option<&str>| -> Result<usize, EmbedError> {
        s.and_then(|x| x.parse().ok())
            .ok_or_else(|| malformed(1, "header must be `<count> <dim>`"))
    };
    let count = parse_usize(h.next())?;
    let dim = parse_usize(h.next())?;
    if h.next().is_some() || dim == 0 {
        return Err(malformed(1, "header must be `<count> <dim>`"));
    }
    let mut table = EmbeddingTable::new(name, dim);
    for (i, line) in lines.enumerate() {
        let lineno = i + 2;
        let line = line?;
        let line = line.trim_end_matches('\r');
        if line.is_empty() {
            continue;
        }
        let mut parts = line.split(' ');
        let id = parts.next().filter(|s| !s.is_empty()).ok_or_else(|| malformed(lineno, "missing id"))?;
        let v = parts
            .map(|p| p.parse::<f64>().map_err(|_| malformed(lineno, format!("bad number {p:?}"))))
            .collect::<Result<Vec<f64>, _>>()?;
        if v.len() != dim {
            return Err(EmbedError::DimMismatch {
                line: lineno,
                expected: dim,
                found: v.len(),
            });
        }
        if v.iter().any(|x| !x.is_finite()) {
            return Err(malformed(lineno, "non-finite value"));
        }
        table.insert(id, v)?;
    }
    if table.len() != count {
        return Err(EmbedError::HeaderMismatch {
            declared: count,
            found: table.len(),
        });
    }
    Ok(table)
}

pub fn load_external(name: &str, path: impl AsRef<Path>) -> Result<EmbeddingTable, EmbedError> {
    read_external(name, BufReader::new(File::open(path)?))
}

pub fn write_external<W: Write>(table: &EmbeddingTable, mut out: W) -> std::io::Result<()> {
    writeln!(out, "{} {}", table.len(), table.dim)?;
    for (id, v) in &table.rows {
        out.write_all(id.as_bytes())?;
        for x in v {
            write!(out, " {x:?}")?;
        }
        out.write_all(b"\n")?;
    }
    Ok(())
}

/// One-dimensional table holding each tweet's word count.
pub fn length_oracle_table(corpus: &Corpus) -> EmbeddingTable {
    let mut t = EmbeddingTable::new("LengthOracle", 1);
    for tw in corpus.tweets() {
        t.rows.insert(tw.id.clone(), vec![tw.word_count() as f64]);
    }
    t
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn reads_header_and_rows() {
        let t = read_external("X", "2 2\na 1 2\nb 3.5 -4\n".as_bytes()).unwrap();
        assert_eq!(t.get("b"), Some(&[3.5, -4.0][..]));
        assert_eq!(t.dim(), 2);
    }

    #[test]
    fn errors() {
        assert!(matches!(
            read_external("X", "3 2\na 1 2\nb 3 4\n".as_bytes()),
            Err(EmbedError::HeaderMismatch { declared: 3, found: 2 })
        ));
        assert!(matches!(
            read_external("X", "2 2\na 1 2\nb 3\n".as_bytes()),
            Err(EmbedError::DimMismatch { line: 3, expected: 2, found: 1 })
        ));
        assert!(matches!(
            read_external("X", "2 2\na 1 2\na 3 4\n".as_bytes()),
            Err(EmbedError::DuplicateId(_))
        ));
        assert!(matches!(
            read_external("X", "two 2\n".as_bytes()),
            Err(EmbedError::Malformed { line: 1, .. })
        ));
    }

    #[test]
    fn missing_id_fails() {
        let t = read_external("X", "1 1\na 1\n".as_bytes()).unwrap();
        assert!(matches!(
            t.embed_tweet(&Tweet::new("b", "hi")),
            Err(EmbedError::MissingId(_))
        ));
    }

    #[test]
    fn oracle_is_word_count() {
        let c = Corpus::from_tweets(vec![Tweet::new("a", "one two #three @four 5 !")]).unwrap();
        assert_eq!(length_oracle_table(&c).get("a"), Some(&[5.0][..]));
    }

    proptest! {
        #[test]
        fn write_read_is_exact(rows in proptest::collection::vec(proptest::collection::vec(-1e6f64..1e6, 3), 1..20)) {
            let mut t = EmbeddingTable::new("X", 3);
            for (i, r) in rows.into_iter().enumerate() {
                t.insert(format!("id{i}"), r).unwrap();
            }
            let mut buf = Vec::new();
            write_external(&t, &mut buf).unwrap();
            prop_assert_eq!(read_external("X", buf.as_slice()).unwrap(), t);
        }
    }
}
