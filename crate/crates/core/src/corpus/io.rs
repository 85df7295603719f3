use std::fs::File;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use chrono::{DateTime, FixedOffset, NaiveDateTime, SecondsFormat, TimeZone, Utc};
use serde::{Deserialize, Serialize};

use super::{Annotations, Corpus, CorpusError, SlangPair, Tweet};

/// On-disk corpus layouts understood by [`load_corpus`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum CorpusFormat {
    Jsonl,
    /// Sentiment140 column layout: polarity, id, date, query, user, text.
    Csv,
}

#[derive(Serialize, Deserialize)]
struct TweetRecord {
    id: String,
    text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    timestamp: Option<String>,
    #[serde(default)]
    reply_to: Option<String>,
    #[serde(default)]
    ne_spans: Vec<[usize; 2]>,
    #[serde(default)]
    slang: Vec<SlangPair>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    informative_caps: Option<Vec<usize>>,
}

fn format_timestamp(ts: &DateTime<Utc>) -> String {
    ts.to_rfc3339_opts(SecondsFormat::AutoSi, true)
}

fn parse_timestamp(s: &str) -> Option<DateTime<Utc>> {
    DateTime::parse_from_rfc3339(s)
        .ok()
        .map(|d| d.with_timezone(&Utc))
}

pub fn load_corpus(path: impl AsRef<Path>, format: CorpusFormat) -> Result<Corpus, CorpusError> {
    let file = File::open(path)?;
    match format {
        CorpusFormat::Jsonl => read_jsonl(BufReader::new(file)),
        CorpusFormat::Csv => read_sentiment140_csv(file),
    }
}

/// Reads the canonical JSONL corpus. Blank lines are skipped; unknown
/// fields are ignored.
pub fn read_jsonl<R: BufRead>(reader: R) -> Result<Corpus, CorpusError> {
    let mut tweets = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let lineno = i + 1;
        let rec: TweetRecord =
            serde_json::from_str(&line).map_err(|e| CorpusError::MalformedRecord {
                line: lineno,
                reason: e.to_string(),
            })?;
        let timestamp = match rec.timestamp.as_deref() {
            None => None,
            Some(s) => Some(parse_timestamp(s).ok_or_else(|| CorpusError::MalformedRecord {
                line: lineno,
                reason: format!("bad timestamp {s:?}"),
            })?),
        };
        let mut tweet = Tweet::new(rec.id, rec.text);
        tweet.timestamp = timestamp;
        tweet.reply_to = rec.reply_to;
        tweet.annotations = Annotations {
            ne_spans: rec.ne_spans.into_iter().map(|[s, e]| (s, e)).collect(),
            slang: rec.slang,
            informative_caps: rec.informative_caps,
        };
        tweet.validate(lineno)?;
        tweets.push(tweet);
    }
    Corpus::from_tweets(tweets)
}

/// Writes the canonical JSONL corpus, one object per line.
pub fn write_jsonl<W: Write>(corpus: &Corpus, mut out: W) -> std::io::Result<()> {
    for t in corpus.tweets() {
        let rec = TweetRecord {
            id: t.id.clone(),
            text: t.text.clone(),
            timestamp: t.timestamp.as_ref().map(format_timestamp),
            reply_to: t.reply_to.clone(),
            ne_spans: t.annotations.ne_spans.iter().map(|&(s, e)| [s, e]).collect(),
            slang: t.annotations.slang.clone(),
            informative_caps: t.annotations.informative_caps.clone(),
        };
        serde_json::to_writer(&mut out, &rec)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

fn parse_sentiment140_date(s: &str) -> Option<DateTime<Utc>> {
    // "Mon Apr 06 22:19:45 PDT 2009"
    let parts: Vec<&str> = s.split_whitespace().collect();
    if parts.len() != 6 {
        return None;
    }
    let offset_hours = match parts[4] {
        "UTC" | "GMT" => 0,
        "PDT" => -7,
        "PST" => -8,
        "EDT" => -4,
        "EST" => -5,
        _ => return None,
    };
    let naive = format!("{} {} {} {}", parts[1], parts[2], parts[5], parts[3]);
    let naive = NaiveDateTime::parse_from_str(&naive, "%b %d %Y %H:%M:%S").ok()?;
    let tz = FixedOffset::east_opt(offset_hours * 3600)?;
    tz.from_local_datetime(&naive)
        .single()
        .map(|d| d.with_timezone(&Utc))
}

/// Converts a Sentiment140-style CSV (no header) into a corpus. Polarity,
/// query and user columns are discarded; unparseable dates become `None`.
pub fn read_sentiment140_csv<R: Read>(reader: R) -> Result<Corpus, CorpusError> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(reader);
    let mut tweets = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let lineno = i + 1;
        let rec = rec.map_err(|e| CorpusError::MalformedRecord {
            line: lineno,
            reason: e.to_string(),
        })?;
        if rec.len() != 6 {
            return Err(CorpusError::MalformedRecord {
                line: lineno,
                reason: format!("expected 6 columns, found {}", rec.len()),
            });
        }
        let mut tweet = Tweet::new(rec[1].trim(), &rec[5]);
        tweet.timestamp = parse_sentiment140_date(&rec[2]);
        tweet.validate(lineno)?;
        tweets.push(tweet);
    }
    Corpus::from_tweets(tweets)
}
