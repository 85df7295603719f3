//! Seeded synthetic tweet corpora with gold annotations.
//!
//! Every tweet is assembled from pieces that each tokenize to exactly one
//! token, so the generator knows the token kind, NE span, slang pair and
//! informative-capitalization status of every position without re-parsing.

use std::collections::BTreeMap;

use chrono::{DateTime, Duration, TimeZone, Utc};
use rand::distributions::{Distribution, WeightedIndex};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand::SeedableRng;
use rand_distr::LogNormal;
use serde::{Deserialize, Serialize};

use super::{tokenize, Annotations, Corpus, CorpusError, SlangPair, TokenKind, Tweet};

/// Slang spellings and their canonical forms.
pub const SLANG_LEXICON: &[(&str, &str)] = &[
    ("tmrw", "tomorrow"),
    ("2day", "today"),
    ("gr8", "great"),
    ("b4", "before"),
    ("u", "you"),
    ("ur", "your"),
    ("pls", "please"),
    ("thx", "thanks"),
    ("luv", "love"),
    ("ppl", "people"),
    ("toook", "took"),
    ("cuz", "because"),
    ("2nite", "tonight"),
    ("msg", "message"),
    ("bday", "birthday"),
    ("soooo", "so"),
    ("yr", "year"),
    ("l8r", "later"),
    ("nite", "night"),
    ("txt", "text"),
    ("kool", "cool"),
    ("ya", "you"),
];

const DEFAULT_GAZETTEER: &[&str] = &[
    "New York",
    "London",
    "Barack Obama",
    "Taylor Swift",
    "Google",
    "Manchester United",
    "San Francisco",
    "Justin Bieber",
    "Apple",
    "Paris",
    "Lady Gaga",
    "Los Angeles",
    "Microsoft",
    "Real Madrid",
    "Kanye West",
    "Chicago",
    "Hillary Clinton",
    "Starbucks",
    "New York City",
    "Katy Perry",
    "Tokyo",
    "Lionel Messi",
    "Amazon",
    "Boston",
    "Donald Trump",
    "Miley Cyrus",
    "Berlin",
    "Nike",
    "Las Vegas",
    "Harry Potter",
];

const CONSONANTS: &[u8] = b"bdfgklmnprstvz";
const VOWELS: &[u8] = b"aeiou";

/// Deterministic pronounceable lowercase word for an index; injective.
pub(crate) fn synthetic_word(i: usize) -> String {
    let base = CONSONANTS.len() * VOWELS.len();
    let mut x = i + base;
    let mut syllables = Vec::new();
    while x > 0 {
        let s = x % base;
        syllables.push(CONSONANTS[s / VOWELS.len()] as char);
        syllables.push(VOWELS[s % VOWELS.len()] as char);
        x /= base;
    }
    syllables.into_iter().collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    pub n_tweets: usize,
    pub vocab_size: usize,
    pub zipf_exponent: f64,
    pub min_words: usize,
    pub max_words: usize,
    pub hashtag_rate: f64,
    pub mention_rate: f64,
    pub url_rate: f64,
    pub number_rate: f64,
    pub reply_probability: f64,
    /// Mean of ln(delay in minutes).
    pub reply_delay_log_mean: f64,
    /// Standard deviation of ln(delay in minutes).
    pub reply_delay_log_sd: f64,
    /// Replies attach to one of this many most recent tweets.
    pub reply_window: usize,
    /// Probability that a reply repeats words of its thread's starter.
    pub repeat_rate: f64,
    pub slang_rate: f64,
    pub ne_rate: f64,
    /// Probability of one all-caps emphasis word in a tweet.
    pub emphasis_rate: f64,
    /// Probability that the first word is capitalized.
    pub initial_cap_rate: f64,
    pub gazetteer: Vec<String>,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            n_tweets: 5000,
            vocab_size: 2000,
            zipf_exponent: 1.05,
            min_words: 2,
            max_words: 30,
            hashtag_rate: 0.2,
            mention_rate: 0.3,
            url_rate: 0.1,
            number_rate: 0.1,
            reply_probability: 0.3,
            reply_delay_log_mean: 15f64.ln(),
            reply_delay_log_sd: 1.0,
            reply_window: 50,
            repeat_rate: 0.6,
            slang_rate: 0.35,
            ne_rate: 0.35,
            emphasis_rate: 0.25,
            initial_cap_rate: 0.3,
            gazetteer: DEFAULT_GAZETTEER.iter().map(|s| s.to_string()).collect(),
            seed: 0,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<(), CorpusError> {
        let bad = |m: String| Err(CorpusError::InvalidConfig(m));
        let rates = [
            ("hashtag_rate", self.hashtag_rate),
            ("mention_rate", self.mention_rate),
            ("url_rate", self.url_rate),
            ("number_rate", self.number_rate),
            ("reply_probability", self.reply_probability),
            ("repeat_rate", self.repeat_rate),
            ("slang_rate", self.slang_rate),
            ("ne_rate", self.ne_rate),
            ("emphasis_rate", self.emphasis_rate),
            ("initial_cap_rate", self.initial_cap_rate),
        ];
        for (name, r) in rates {
            if !(0.0..=1.0).contains(&r) {
                return bad(format!("{name} = {r} is outside [0, 1]"));
            }
        }
        if self.n_tweets == 0 {
            return bad("n_tweets must be at least 1".into());
        }
        if self.vocab_size < 2 {
            return bad("vocab_size must be at least 2".into());
        }
        if self.min_words > self.max_words {
            return bad("min_words exceeds max_words".into());
        }
        if !(self.zipf_exponent.is_finite() && self.zipf_exponent >= 0.0) {
            return bad("zipf_exponent must be finite and non-negative".into());
        }
        if !(self.reply_delay_log_sd.is_finite() && self.reply_delay_log_sd > 0.0)
            || !self.reply_delay_log_mean.is_finite()
        {
            return bad("reply delay parameters must be finite with positive sd".into());
        }
        if self.reply_window == 0 {
            return bad("reply_window must be at least 1".into());
        }
        if self.ne_rate > 0.0 && self.gazetteer.is_empty() {
            return bad("ne_rate > 0 needs a non-empty gazetteer".into());
        }
        for entry in &self.gazetteer {
            let toks = tokenize(entry);
            if toks.is_empty() || toks.iter().any(|t| t.kind != TokenKind::Word) {
                return bad(format!("gazetteer entry {entry:?} is not plain words"));
            }
        }
        Ok(())
    }
}

/// Ground truth recorded while generating.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SynthTruth {
    pub kind_counts: BTreeMap<TokenKind, usize>,
    pub hashtag_tweets: usize,
    pub reply_tweets: usize,
    /// Starters that received at least one reply.
    pub conversations: usize,
    /// Starter id → minutes until its earliest direct reply.
    pub first_reply_minutes: BTreeMap<String, f64>,
}

#[derive(Debug, Clone)]
pub struct Synthetic {
    pub corpus: Corpus,
    pub truth: SynthTruth,
}

#[derive(Debug, Clone)]
struct Piece {
    text: String,
    kind: TokenKind,
    ne_group: bool,
    slang: Option<&'static str>,
    /// attach to the previous piece without a space
    glued: bool,
}

impl Piece {
    fn new(text: String, kind: TokenKind) -> Self {
        Piece {
            text,
            kind,
            ne_group: false,
            slang: None,
            glued: false,
        }
    }

    fn plain_word(&self) -> bool {
        self.kind == TokenKind::Word && !self.ne_group && self.slang.is_none()
    }
}

struct Generator<'a> {
    cfg: &'a SynthConfig,
    rng: ChaCha8Rng,
    zipf: WeightedIndex<f64>,
    words: Vec<String>,
    users: Vec<String>,
}

impl Generator<'_> {
    fn word(&mut self) -> String {
        let i = self.zipf.sample(&mut self.rng);
        self.words[i].clone()
    }

    fn insert_at_random(&mut self, pieces: &mut Vec<Piece>, new: Vec<Piece>) {
        let pos = self.rng.gen_range(0..=pieces.len());
        pieces.splice(pos..pos, new);
    }

    fn tweet_pieces(&mut self, repeat_from: Option<&[String]>) -> (Vec<Piece>, Vec<String>) {
        let cfg = self.cfg;
        let n_words = self.rng.gen_range(cfg.min_words..=cfg.max_words);
        let mut base: Vec<String> = (0..n_words).map(|_| self.word()).collect();
        if let Some(root_words) = repeat_from {
            if !root_words.is_empty() && self.rng.gen_bool(cfg.repeat_rate) {
                let k = self.rng.gen_range(1..=2usize);
                for _ in 0..k {
                    let w = root_words.choose(&mut self.rng).unwrap().clone();
                    let pos = self.rng.gen_range(0..=base.len());
                    base.insert(pos, w);
                }
            }
        }
        let mut pieces: Vec<Piece> = base
            .iter()
            .map(|w| Piece::new(w.clone(), TokenKind::Word))
            .collect();

        if self.rng.gen_bool(cfg.slang_rate) {
            let &(slang, canonical) = SLANG_LEXICON.choose(&mut self.rng).unwrap();
            let mut p = Piece::new(slang.to_string(), TokenKind::Word);
            p.slang = Some(canonical);
            self.insert_at_random(&mut pieces, vec![p]);
        }
        if !cfg.gazetteer.is_empty() && self.rng.gen_bool(cfg.ne_rate) {
            let entry = cfg.gazetteer.choose(&mut self.rng).unwrap().clone();
            let group = entry
                .split_whitespace()
                .map(|w| {
                    let mut p = Piece::new(w.to_string(), TokenKind::Word);
                    p.ne_group = true;
                    p
                })
                .collect();
            self.insert_at_random(&mut pieces, group);
        }
        if self.rng.gen_bool(cfg.number_rate) {
            let n: u32 = self.rng.gen_range(1..=100);
            self.insert_at_random(&mut pieces, vec![Piece::new(n.to_string(), TokenKind::Number)]);
        }
        if self.rng.gen_bool(cfg.hashtag_rate) {
            let k = self.rng.gen_range(1..=2usize);
            for _ in 0..k {
                let tag = format!("#{}", self.word());
                let p = Piece::new(tag, TokenKind::Hashtag);
                if self.rng.gen_bool(0.5) {
                    pieces.push(p);
                } else {
                    self.insert_at_random(&mut pieces, vec![p]);
                }
            }
        }
        if self.rng.gen_bool(cfg.mention_rate) {
            let k = self.rng.gen_range(1..=3usize);
            let at_start = self.rng.gen_bool(0.5);
            for j in 0..k {
                let user = self.users.choose(&mut self.rng).unwrap();
                let p = Piece::new(format!("@{user}"), TokenKind::Mention);
                if at_start {
                    pieces.insert(j, p);
                } else {
                    self.insert_at_random(&mut pieces, vec![p]);
                }
            }
        }
        if let Some(first) = pieces.first_mut() {
            if first.plain_word() && self.rng.gen_bool(cfg.initial_cap_rate) {
                let mut cs = first.text.chars();
                let head = cs.next().unwrap().to_uppercase().collect::<String>();
                first.text = head + cs.as_str();
            }
        }
        if self.rng.gen_bool(cfg.emphasis_rate) {
            let candidates: Vec<usize> = (0..pieces.len())
                .filter(|&i| pieces[i].plain_word())
                .collect();
            if let Some(&i) = candidates.choose(&mut self.rng) {
                pieces[i].text = pieces[i].text.to_uppercase();
            }
        }
        if !pieces.is_empty() && self.rng.gen_bool(0.3) {
            let mark = ["!", ".", "?"].choose(&mut self.rng).unwrap();
            let mut p = Piece::new(mark.to_string(), TokenKind::Punct);
            p.glued = true;
            pieces.push(p);
        }
        if self.rng.gen_bool(cfg.url_rate) {
            const ALNUM: &[u8] = b"abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ0123456789";
            let code: String = (0..7)
                .map(|_| ALNUM[self.rng.gen_range(0..ALNUM.len())] as char)
                .collect();
            pieces.push(Piece::new(format!("http://t.co/{code}"), TokenKind::Url));
        }
        (pieces, base)
    }
}

fn assemble(id: String, pieces: &[Piece]) -> Tweet {
    let mut text = String::new();
    for p in pieces {
        if !text.is_empty() && !p.glued {
            text.push(' ');
        }
        text.push_str(&p.text);
    }
    let mut tweet = Tweet::new(id, text);
    assert_eq!(
        tweet.tokens.len(),
        pieces.len(),
        "generator piece does not map to one token: {:?}",
        tweet.text
    );
    let mut ne_spans = Vec::new();
    let mut i = 0;
    while i < pieces.len() {
        if pieces[i].ne_group {
            let s = i;
            while i < pieces.len() && pieces[i].ne_group {
                i += 1;
            }
            ne_spans.push((s, i));
        } else {
            i += 1;
        }
    }
    let slang = pieces
        .iter()
        .enumerate()
        .filter_map(|(i, p)| {
            p.slang.map(|c| SlangPair {
                index: i,
                canonical: c.to_string(),
            })
        })
        .collect();
    let informative_caps = pieces
        .iter()
        .enumerate()
        .filter(|(_, p)| p.ne_group)
        .map(|(i, _)| i)
        .collect();
    tweet.annotations = Annotations {
        ne_spans,
        slang,
        informative_caps: Some(informative_caps),
    };
    tweet
}

fn epoch() -> DateTime<Utc> {
    Utc.with_ymd_and_hms(2016, 1, 1, 0, 0, 0).unwrap()
}

/// Generates a seeded corpus together with its ground-truth record.
pub fn generate_synthetic(cfg: &SynthConfig) -> Result<Synthetic, CorpusError> {
    cfg.validate()?;
    let weights: Vec<f64> = (0..cfg.vocab_size)
        .map(|r| 1.0 / ((r + 1) as f64).powf(cfg.zipf_exponent))
        .collect();
    let mut gen = Generator {
        cfg,
        rng: ChaCha8Rng::seed_from_u64(cfg.seed),
        zipf: WeightedIndex::new(&weights).expect("positive weights"),
        words: (0..cfg.vocab_size).map(synthetic_word).collect(),
        users: (0..300).map(|j| synthetic_word(100_000 + j)).collect(),
    };
    let delay = LogNormal::new(cfg.reply_delay_log_mean, cfg.reply_delay_log_sd)
        .map_err(|e| CorpusError::InvalidConfig(e.to_string()))?;

    let mut truth = SynthTruth::default();
    let mut tweets: Vec<Tweet> = Vec::with_capacity(cfg.n_tweets);
    let mut root_of: Vec<usize> = Vec::with_capacity(cfg.n_tweets);
    let mut base_words: Vec<Vec<String>> = Vec::with_capacity(cfg.n_tweets);
    let mut has_reply = vec![false; cfg.n_tweets];
    let mut clock = epoch();

    for i in 0..cfg.n_tweets {
        let parent = if i > 0 && gen.rng.gen_bool(cfg.reply_probability) {
            let lo = i.saturating_sub(cfg.reply_window);
            Some(gen.rng.gen_range(lo..i))
        } else {
            None
        };
        let root = parent.map_or(i, |p| root_of[p]);
        let repeat_from = parent.map(|_| base_words[root].clone());
        let (pieces, base) = gen.tweet_pieces(repeat_from.as_deref());
        let mut tweet = assemble(format!("t{i:06}"), &pieces);

        match parent {
            None => {
                clock += Duration::seconds(gen.rng.gen_range(30..=300));
                tweet.timestamp = Some(clock);
            }
            Some(p) => {
                let minutes: f64 = delay.sample(&mut gen.rng);
                let secs = ((minutes * 60.0).round() as i64).clamp(1, 14 * 24 * 3600);
                let parent_ts = tweets[p].timestamp.expect("generated tweets are timed");
                tweet.timestamp = Some(parent_ts + Duration::seconds(secs));
                tweet.reply_to = Some(tweets[p].id.clone());
                truth.reply_tweets += 1;
                has_reply[root] = true;
                if p == root {
                    let m = secs as f64 / 60.0;
                    let e = truth
                        .first_reply_minutes
                        .entry(tweets[p].id.clone())
                        .or_insert(m);
                    if m < *e {
                        *e = m;
                    }
                }
            }
        }

        for p in &pieces {
            *truth.kind_counts.entry(p.kind).or_insert(0) += 1;
        }
        if pieces.iter().any(|p| p.kind == TokenKind::Hashtag) {
            truth.hashtag_tweets += 1;
        }
        root_of.push(root);
        base_words.push(base);
        tweets.push(tweet);
    }
    truth.conversations = has_reply.iter().filter(|&&b| b).count();

    Ok(Synthetic {
        corpus: Corpus::from_tweets(tweets)?,
        truth,
    })
}

/// A corpus whose documents are drawn from disjoint per-topic vocabularies.
#[derive(Debug, Clone)]
pub struct TopicCorpus {
    pub corpus: Corpus,
    /// Generating topic of each tweet, in corpus order.
    pub topics: Vec<usize>,
}

/// Generates `n_docs` tweets, each using words of a single topic only.
pub fn generate_topic_corpus(
    n_docs: usize,
    n_topics: usize,
    words_per_topic: usize,
    doc_len: usize,
    seed: u64,
) -> Result<TopicCorpus, CorpusError> {
    if n_docs == 0 || n_topics == 0 || words_per_topic == 0 || doc_len == 0 {
        return Err(CorpusError::InvalidConfig(
            "topic corpus sizes must be positive".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut tweets = Vec::with_capacity(n_docs);
    let mut topics = Vec::with_capacity(n_docs);
    for d in 0..n_docs {
        let topic = rng.gen_range(0..n_topics);
        let words: Vec<String> = (0..doc_len)
            .map(|_| synthetic_word(topic * words_per_topic + rng.gen_range(0..words_per_topic)))
            .collect();
        tweets.push(Tweet::new(format!("d{d:06}"), words.join(" ")));
        topics.push(topic);
    }
    Ok(TopicCorpus {
        corpus: Corpus::from_tweets(tweets)?,
        topics,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{thread_conversations, write_jsonl};
    use std::collections::HashSet;

    fn small(seed: u64) -> SynthConfig {
        SynthConfig {
            n_tweets: 1000,
            seed,
            ..SynthConfig::default()
        }
    }

    #[test]
    fn synthetic_words_are_unique_and_lowercase() {
        let words: HashSet<String> = (0..20_000).map(synthetic_word).collect();
        assert_eq!(words.len(), 20_000);
        assert!(words.iter().all(|w| w.chars().all(|c| c.is_ascii_lowercase())));
    }

    #[test]
    fn deterministic_bytes() {
        let mut a = Vec::new();
        let mut b = Vec::new();
        write_jsonl(&generate_synthetic(&small(3)).unwrap().corpus, &mut a).unwrap();
        write_jsonl(&generate_synthetic(&small(3)).unwrap().corpus, &mut b).unwrap();
        assert_eq!(a, b);
        let mut c = Vec::new();
        write_jsonl(&generate_synthetic(&small(4)).unwrap().corpus, &mut c).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn token_kinds_match_generator_record() {
        let s = generate_synthetic(&small(11)).unwrap();
        let mut counts = BTreeMap::new();
        for t in s.corpus.tweets() {
            for tok in &t.tokens {
                *counts.entry(tok.kind).or_insert(0usize) += 1;
            }
        }
        assert_eq!(counts, s.truth.kind_counts);
    }

    #[test]
    fn zero_mention_rate_means_no_mentions() {
        let cfg = SynthConfig {
            mention_rate: 0.0,
            ..small(5)
        };
        let s = generate_synthetic(&cfg).unwrap();
        assert!(s
            .corpus
            .tweets()
            .iter()
            .flat_map(|t| &t.tokens)
            .all(|t| t.kind != TokenKind::Mention));
    }

    #[test]
    fn hashtag_fraction_tracks_rate() {
        let cfg = SynthConfig {
            n_tweets: 5000,
            hashtag_rate: 0.2,
            seed: 9,
            ..SynthConfig::default()
        };
        let s = generate_synthetic(&cfg).unwrap();
        let with_tag = s
            .corpus
            .tweets()
            .iter()
            .filter(|t| t.tokens.iter().any(|k| k.kind == TokenKind::Hashtag))
            .count();
        let frac = with_tag as f64 / 5000.0;
        assert!((frac - 0.2).abs() <= 0.02, "fraction {frac}");
        assert_eq!(with_tag, s.truth.hashtag_tweets);
    }

    #[test]
    fn conversation_count_matches_record() {
        let cfg = SynthConfig {
            reply_probability: 0.3,
            ..small(21)
        };
        let s = generate_synthetic(&cfg).unwrap();
        let th = thread_conversations(&s.corpus);
        assert_eq!(th.conversations.len(), s.truth.conversations);
        assert!(th.dangling.is_empty());
        for conv in &th.conversations {
            for w in conv.tweets.windows(2) {
                let a = s.corpus.get(&w[0]).unwrap().timestamp;
                let b = s.corpus.get(&w[1]).unwrap().timestamp;
                assert!(a <= b);
            }
        }
    }

    #[test]
    fn invalid_rates_rejected() {
        let cfg = SynthConfig {
            hashtag_rate: 1.5,
            ..SynthConfig::default()
        };
        assert!(matches!(
            generate_synthetic(&cfg),
            Err(CorpusError::InvalidConfig(_))
        ));
        let cfg = SynthConfig {
            n_tweets: 0,
            ..SynthConfig::default()
        };
        assert!(generate_synthetic(&cfg).is_err());
    }

    #[test]
    fn texts_fit_byte_limit() {
        let s = generate_synthetic(&small(2)).unwrap();
        assert!(s
            .corpus
            .tweets()
            .iter()
            .all(|t| t.text.len() <= crate::corpus::MAX_TWEET_BYTES));
    }

    #[test]
    fn topic_corpus_uses_disjoint_vocabularies() {
        let tc = generate_topic_corpus(200, 2, 50, 10, 1).unwrap();
        let mut vocab = [HashSet::new(), HashSet::new()];
        for (t, &topic) in tc.corpus.tweets().iter().zip(&tc.topics) {
            vocab[topic].extend(t.tokens.iter().map(|k| k.surface.clone()));
        }
        assert!(!vocab[0].is_empty() && !vocab[1].is_empty());
        assert!(vocab[0].is_disjoint(&vocab[1]));
    }
}
