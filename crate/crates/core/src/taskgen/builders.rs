//! Raw instance constructors, one per task. `build_task` wraps these with
//! shuffling, splitting and provenance.

use std::collections::{BTreeSet, HashMap, HashSet};

use rand::seq::{index, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{AuxItem, TaskInstance, TaskKind};
use crate::corpus::{thread_conversations, Corpus, Token, TokenKind, Tweet};
use crate::hashing::derive_seed;
use crate::taskgen::TaskConfig;

fn rng_for(seed: u64, kind: TaskKind) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(seed, kind.name()))
}

fn inst(tweet: &Tweet, aux: Vec<AuxItem>, label: usize) -> TaskInstance {
    TaskInstance {
        tweet_id: tweet.id.clone(),
        aux,
        label,
    }
}

fn word(s: &str) -> AuxItem {
    AuxItem::Word(s.to_string())
}

/// Keeps an equal number of positives and negatives, downsampling the
/// larger side uniformly while preserving relative order.
fn balance(
    mut pos: Vec<TaskInstance>,
    mut neg: Vec<TaskInstance>,
    rng: &mut ChaCha8Rng,
) -> Vec<TaskInstance> {
    let n = pos.len().min(neg.len());
    let shrink = |v: &mut Vec<TaskInstance>, rng: &mut ChaCha8Rng| {
        if v.len() > n {
            let mut keep = index::sample(rng, v.len(), n).into_vec();
            keep.sort_unstable();
            *v = keep.into_iter().map(|i| v[i].clone()).collect();
        }
    };
    shrink(&mut pos, rng);
    shrink(&mut neg, rng);
    pos.into_iter().chain(neg).collect()
}

fn lower_surfaces(tweet: &Tweet) -> HashSet<String> {
    tweet
        .tokens
        .iter()
        .map(|t| t.stripped().to_lowercase())
        .collect()
}

fn word_positions(tokens: &[Token]) -> Vec<usize> {
    tokens
        .iter()
        .enumerate()
        .filter(|(_, t)| t.kind == TokenKind::Word)
        .map(|(i, _)| i)
        .collect()
}

/// Length: binned word count, `min(floor(count / width), max_bin)`.
pub fn length_instances(corpus: &Corpus, cfg: &TaskConfig) -> Vec<TaskInstance> {
    corpus
        .tweets()
        .iter()
        .map(|t| {
            let label = (t.word_count() / cfg.length_bin_width).min(cfg.length_max_bin);
            inst(t, vec![], label)
        })
        .collect()
}

/// Content: one in-tweet word (label 1) and one vocabulary word absent
/// from the tweet (label 0) per tweet with at least one word.
pub fn content_instances(corpus: &Corpus, seed: u64) -> Vec<TaskInstance> {
    let mut rng = rng_for(seed, TaskKind::Content);
    let vocab: Vec<&str> = corpus
        .tweets()
        .iter()
        .flat_map(|t| &t.tokens)
        .filter(|t| t.kind == TokenKind::Word)
        .map(|t| t.surface.as_str())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    if vocab.len() < 2 {
        return Vec::new();
    }
    let mut out = Vec::new();
    for t in corpus.tweets() {
        let words = word_positions(&t.tokens);
        let Some(&p) = words.choose(&mut rng) else {
            continue;
        };
        let present = lower_surfaces(t);
        let absent = |w: &str| !present.contains(&w.to_lowercase());
        let mut negative = None;
        for _ in 0..64 {
            let w = vocab[rng.gen_range(0..vocab.len())];
            if absent(w) {
                negative = Some(w);
                break;
            }
        }
        if negative.is_none() {
            let candidates: Vec<&str> = vocab.iter().copied().filter(|w| absent(w)).collect();
            negative = candidates.choose(&mut rng).copied();
        }
        let Some(negative) = negative else {
            continue;
        };
        out.push(inst(t, vec![word(&t.tokens[p].surface)], 1));
        out.push(inst(t, vec![word(negative)], 0));
    }
    out
}

/// Word order: `(w_i, w_j)` with `i < j` is label 1, its flip label 0.
/// Only words whose surface occurs once in the tweet are eligible, so the
/// order of a pair is never ambiguous.
pub fn word_order_instances(corpus: &Corpus, seed: u64) -> Vec<TaskInstance> {
    let mut rng = rng_for(seed, TaskKind::WordOrder);
    let mut out = Vec::new();
    for t in corpus.tweets() {
        let positions = word_positions(&t.tokens);
        let mut counts: HashMap<&str, usize> = HashMap::new();
        for &p in &positions {
            *counts.entry(t.tokens[p].surface.as_str()).or_default() += 1;
        }
        let unique: Vec<usize> = positions
            .into_iter()
            .filter(|&p| counts[t.tokens[p].surface.as_str()] == 1)
            .collect();
        if unique.len() < 2 {
            continue;
        }
        let pick = index::sample(&mut rng, unique.len(), 2).into_vec();
        let (i, j) = (unique[pick[0].min(pick[1])], unique[pick[0].max(pick[1])]);
        let (a, b) = (&t.tokens[i].surface, &t.tokens[j].surface);
        out.push(inst(t, vec![word(a), word(b)], 1));
        out.push(inst(t, vec![word(b), word(a)], 0));
    }
    out
}

/// Slang: `(slang, canonical)` is label 1; `(slang, other canonical)` is
/// label 0, the other canonical drawn from the corpus-wide canonical set.
pub fn slang_instances(corpus: &Corpus, seed: u64) -> Vec<TaskInstance> {
    let mut rng = rng_for(seed, TaskKind::SlangWords);
    let canon: Vec<&str> = corpus
        .tweets()
        .iter()
        .flat_map(|t| &t.annotations.slang)
        .map(|p| p.canonical.as_str())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    if canon.len() < 2 {
        return Vec::new();
    }
    let mut out = Vec::new();
    for t in corpus.tweets() {
        let Some(pair) = t.annotations.slang.choose(&mut rng) else {
            continue;
        };
        let slang = &t.tokens[pair.index].surface;
        let others: Vec<&str> = canon
            .iter()
            .copied()
            .filter(|c| *c != pair.canonical)
            .collect();
        let neg = others.choose(&mut rng).expect("two canonicals exist");
        out.push(inst(t, vec![word(slang), word(&pair.canonical)], 1));
        out.push(inst(t, vec![word(slang), word(neg)], 0));
    }
    out
}

/// Hashtag: a hashtag with `#` stripped (label 1) against a non-hashtag word
/// from the same tweet (label 0).
pub fn hashtag_instances(corpus: &Corpus, seed: u64) -> Vec<TaskInstance> {
    let mut rng = rng_for(seed, TaskKind::Hashtag);
    let mut out = Vec::new();
    for t in corpus.tweets() {
        let tags: Vec<&Token> = t
            .tokens
            .iter()
            .filter(|k| k.kind == TokenKind::Hashtag)
            .collect();
        let tag_words: HashSet<String> = tags.iter().map(|k| k.stripped().to_lowercase()).collect();
        let plain: Vec<&Token> = t
            .tokens
            .iter()
            .filter(|k| k.kind == TokenKind::Word && !tag_words.contains(&k.surface.to_lowercase()))
            .collect();
        let (Some(tag), Some(w)) = (tags.choose(&mut rng), plain.choose(&mut rng)) else {
            continue;
        };
        out.push(inst(t, vec![word(tag.stripped())], 1));
        out.push(inst(t, vec![word(&w.surface)], 0));
    }
    out
}

/// Named entity: an annotated span (label 1) against a same-length span
/// from the same tweet that overlaps no entity (label 0).
pub fn named_entity_instances(corpus: &Corpus, seed: u64) -> Vec<TaskInstance> {
    let mut rng = rng_for(seed, TaskKind::NamedEntity);
    let mut out = Vec::new();
    for t in corpus.tweets() {
        let spans = &t.annotations.ne_spans;
        let Some(&(s, e)) = spans.choose(&mut rng) else {
            continue;
        };
        let len = e - s;
        let n = t.tokens.len();
        let starts: Vec<usize> = (0..=n.saturating_sub(len))
            .filter(|&a| a + len <= n)
            .filter(|&a| spans.iter().all(|&(gs, ge)| a + len <= gs || a >= ge))
            .collect();
        let Some(&a) = starts.choose(&mut rng) else {
            continue;
        };
        let gram = |from: usize| {
            AuxItem::Ngram(
                t.tokens[from..from + len]
                    .iter()
                    .map(|k| k.surface.clone())
                    .collect(),
            )
        };
        out.push(inst(t, vec![gram(s)], 1));
        out.push(inst(t, vec![gram(a)], 0));
    }
    out
}

/// Capitalization count: capitalized Word tokens, clamped.
pub fn cap_count_instances(corpus: &Corpus, cfg: &TaskConfig) -> Vec<TaskInstance> {
    corpus
        .tweets()
        .iter()
        .map(|t| {
            let n = t
                .tokens
                .iter()
                .filter(|k| k.kind == TokenKind::Word && k.capitalized)
                .count();
            inst(t, vec![], n.min(cfg.cap_max_class))
        })
        .collect()
}

/// Informative capitalization: a capitalized word that is part of an entity
/// mention (label 1) or capitalized for other reasons (label 0).
pub fn informative_cap_instances(corpus: &Corpus, seed: u64) -> Vec<TaskInstance> {
    let mut rng = rng_for(seed, TaskKind::InformativeCap);
    let mut pos = Vec::new();
    let mut neg = Vec::new();
    for t in corpus.tweets() {
        let informative: HashSet<usize> = t.informative_caps().into_iter().collect();
        let caps: Vec<usize> = word_positions(&t.tokens)
            .into_iter()
            .filter(|&i| t.tokens[i].capitalized)
            .collect();
        let (yes, no): (Vec<usize>, Vec<usize>) =
            caps.into_iter().partition(|i| informative.contains(i));
        if let Some(&i) = yes.choose(&mut rng) {
            pos.push(inst(t, vec![word(&t.tokens[i].surface)], 1));
        }
        if let Some(&i) = no.choose(&mut rng) {
            neg.push(inst(t, vec![word(&t.tokens[i].surface)], 0));
        }
    }
    balance(pos, neg, &mut rng)
}

/// Mention count: number of Mention tokens, clamped.
pub fn mention_count_instances(corpus: &Corpus, cfg: &TaskConfig) -> Vec<TaskInstance> {
    corpus
        .tweets()
        .iter()
        .map(|t| {
            let n = t
                .tokens
                .iter()
                .filter(|k| k.kind == TokenKind::Mention)
                .count();
            inst(t, vec![], n.min(cfg.mention_max_class))
        })
        .collect()
}

/// Mention position: token index of the first mention, clamped; tweets
/// without mentions are skipped.
pub fn mention_position_instances(corpus: &Corpus, cfg: &TaskConfig) -> Vec<TaskInstance> {
    corpus
        .tweets()
        .iter()
        .filter_map(|t| {
            t.tokens
                .iter()
                .position(|k| k.kind == TokenKind::Mention)
                .map(|p| inst(t, vec![], p.min(cfg.mention_position_max_class)))
        })
        .collect()
}

/// Is reply: threaded replies (label 1) against conversation starters
/// (label 0). Dangling replies are excluded.
pub fn is_reply_instances(corpus: &Corpus, seed: u64) -> Vec<TaskInstance> {
    let mut rng = rng_for(seed, TaskKind::IsReply);
    let threads = thread_conversations(corpus);
    let mut pos = Vec::new();
    let mut neg = Vec::new();
    for conv in &threads.conversations {
        for id in &conv.tweets {
            let t = corpus.get(id).expect("threaded ids resolve");
            if *id == conv.starter {
                neg.push(inst(t, vec![], 0));
            } else {
                pos.push(inst(t, vec![], 1));
            }
        }
    }
    balance(pos, neg, &mut rng)
}

/// Reply time: minutes from a starter to its earliest direct reply, binned;
/// only starters answered within the configured window.
pub fn reply_time_instances(corpus: &Corpus, cfg: &TaskConfig) -> Vec<TaskInstance> {
    let threads = thread_conversations(corpus);
    let classes = cfg.reply_window_minutes / cfg.reply_bin_minutes;
    let mut out = Vec::new();
    for conv in &threads.conversations {
        let starter = corpus.get(&conv.starter).expect("starter resolves");
        let Some(t0) = starter.timestamp else {
            continue;
        };
        let first = conv
            .tweets
            .iter()
            .filter_map(|id| corpus.get(id))
            .filter(|t| t.reply_to.as_deref() == Some(conv.starter.as_str()))
            .filter_map(|t| t.timestamp)
            .min();
        let Some(t1) = first else {
            continue;
        };
        let minutes = (t1 - t0).num_milliseconds() as f64 / 60_000.0;
        if !(0.0..=cfg.reply_window_minutes as f64).contains(&minutes) {
            continue;
        }
        let label = ((minutes / cfg.reply_bin_minutes as f64).floor() as usize).min(classes - 1);
        out.push(inst(starter, vec![], label));
    }
    out
}

/// Word repetition: the starter word used most often in the rest of the
/// thread (label 1, ties to the earliest position) against a starter word
/// never used later (label 0).
pub fn word_repetition_instances(corpus: &Corpus, seed: u64) -> Vec<TaskInstance> {
    let mut rng = rng_for(seed, TaskKind::WordRepetition);
    let threads = thread_conversations(corpus);
    let mut out = Vec::new();
    for conv in &threads.conversations {
        if conv.tweets.len() < 2 {
            continue;
        }
        let starter = corpus.get(&conv.starter).expect("starter resolves");
        let mut later: HashMap<String, usize> = HashMap::new();
        for id in conv.tweets.iter().filter(|id| **id != conv.starter) {
            for tok in &corpus.get(id).expect("threaded ids resolve").tokens {
                if tok.kind == TokenKind::Word {
                    *later.entry(tok.surface.to_lowercase()).or_default() += 1;
                }
            }
        }
        // distinct starter words in order of first occurrence
        let mut seen = HashSet::new();
        let words: Vec<&str> = starter
            .tokens
            .iter()
            .filter(|k| k.kind == TokenKind::Word)
            .map(|k| k.surface.as_str())
            .filter(|w| seen.insert(w.to_lowercase()))
            .collect();
        let count = |w: &str| later.get(&w.to_lowercase()).copied().unwrap_or(0);
        let mut best: Option<(&str, usize)> = None;
        for &w in &words {
            let c = count(w);
            if c > 0 && best.is_none_or(|(_, bc)| c > bc) {
                best = Some((w, c));
            }
        }
        let unused: Vec<&str> = words.iter().copied().filter(|w| count(w) == 0).collect();
        let (Some((top, _)), Some(&never)) = (best, unused.choose(&mut rng)) else {
            continue;
        };
        out.push(inst(starter, vec![word(top)], 1));
        out.push(inst(starter, vec![word(never)], 0));
    }
    out
}
