use std::collections::HashSet;

use proptest::prelude::*;

use tweetprobe::corpus::{generate_synthetic, read_jsonl, write_jsonl, SynthConfig};
use tweetprobe::taskgen::{stratified_group_split, stratified_split};
use tweetprobe::{build_task, tokenize, TaskConfig, TaskKind, TokenKind};

#[test]
fn synthetic_hashtag_rate_is_respected() {
    let cfg = SynthConfig {
        n_tweets: 5000,
        hashtag_rate: 0.2,
        seed: 21,
        ..SynthConfig::default()
    };
    let c = generate_synthetic(&cfg).unwrap().corpus;
    let tagged = c
        .tweets()
        .iter()
        .filter(|t| tokenize(&t.text).iter().any(|k| k.kind == TokenKind::Hashtag))
        .count();
    let rate = tagged as f64 / c.len() as f64;
    assert!((rate - 0.2).abs() <= 0.02, "{rate}");
}

#[test]
fn corpus_jsonl_round_trip() {
    let cfg = SynthConfig {
        n_tweets: 300,
        seed: 8,
        ..SynthConfig::default()
    };
    let c = generate_synthetic(&cfg).unwrap().corpus;
    let mut buf = Vec::new();
    write_jsonl(&c, &mut buf).unwrap();
    let back = read_jsonl(buf.as_slice()).unwrap();
    assert_eq!(back.fingerprint(), c.fingerprint());
    assert_eq!(back.tweets(), c.tweets());
}

#[test]
fn hundred_balanced_instances_split_35_5_10_per_class() {
    let labels: Vec<usize> = (0..100).map(|i| i % 2).collect();
    let s = stratified_split(&labels, 2, [0.7, 0.1, 0.2], 1).unwrap();
    let per_class = |idx: &[usize]| idx.iter().filter(|&&i| labels[i] == 1).count();
    assert_eq!((per_class(&s.train), per_class(&s.val), per_class(&s.test)), (35, 5, 10));
    assert_eq!((s.train.len(), s.val.len(), s.test.len()), (70, 10, 20));
    let all: HashSet<usize> = s.train.iter().chain(&s.val).chain(&s.test).copied().collect();
    assert_eq!(all.len(), 100);
}

#[test]
fn every_task_builds_with_disjoint_splits() {
    let cfg = SynthConfig {
        n_tweets: 1500,
        seed: 12,
        ..SynthConfig::default()
    };
    let c = generate_synthetic(&cfg).unwrap().corpus;
    for kind in TaskKind::ALL {
        let ds = build_task(kind, &c, &TaskConfig::default(), 12).unwrap();
        let n = ds.instances.len();
        let s = &ds.splits;
        assert_eq!(s.train.len() + s.val.len() + s.test.len(), n, "{kind}");
        let tweets = |idx: &[usize]| idx.iter().map(|&i| ds.instances[i].tweet_id.clone()).collect::<HashSet<_>>();
        assert!(tweets(&s.train).is_disjoint(&tweets(&s.test)), "{kind}: a tweet straddles train and test");
        assert!(ds.instances.iter().all(|i| i.label < ds.class_count));
        let again = build_task(kind, &c, &TaskConfig::default(), 12).unwrap();
        assert_eq!(again, ds, "{kind} not reproducible");
    }
}

proptest! {
    #[test]
    fn group_split_never_separates_a_group(groups in proptest::collection::vec(0u8..30, 20..120), seed in any::<u64>()) {
        let labels: Vec<usize> = groups.iter().map(|g| (*g as usize) % 2).collect();
        let s = stratified_group_split(&labels, &groups, 2, [0.7, 0.1, 0.2], seed).unwrap();
        let mut owner = std::collections::HashMap::new();
        for (part, idx) in [&s.train, &s.val, &s.test].into_iter().enumerate() {
            for &i in idx {
                let prev = owner.insert(groups[i], part);
                prop_assert!(prev.is_none() || prev == Some(part));
            }
        }
        prop_assert_eq!(s.train.len() + s.val.len() + s.test.len(), labels.len());
    }
}
