use std::collections::HashSet;

use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use tweetprobe::corpus::{generate_synthetic, SynthConfig};
use tweetprobe::embedders::WordVecStore;
use tweetprobe::fasttext::{bucket_of, evaluate_ft, featurize_ft, ft_gradient_check, train_ft, FtConfig, FtModel};
use tweetprobe::pipeline::{run_cell, ModelChoice, PipelineConfig};
use tweetprobe::probe::ProbeError;
use tweetprobe::taskgen::{build_task, AuxItem, TaskConfig};
use tweetprobe::{Corpus, TaskKind, Tweet};

fn corpus(n: usize, seed: u64) -> Corpus {
    let cfg = SynthConfig {
        n_tweets: n,
        seed,
        ..SynthConfig::default()
    };
    generate_synthetic(&cfg).unwrap().corpus
}

#[test]
fn collisions_match_birthday_estimate() {
    let b = 1usize << 16;
    let n = 50_000;
    let grams: Vec<String> = (0..n).map(|i| format!("w{} w{}", i / 300, i % 300)).collect();
    let used: HashSet<u32> = grams.iter().map(|g| bucket_of(g, b)).collect();
    let observed = (n - used.len()) as f64;
    let expected = n as f64 - b as f64 * (1.0 - (-(n as f64) / b as f64).exp());
    assert!(
        (observed - expected).abs() <= 0.2 * expected,
        "observed {observed}, expected {expected:.0}"
    );
}

#[test]
fn gradient_matches_finite_differences() {
    for seed in 0..5 {
        assert!(ft_gradient_check(seed, false) < 1e-4);
    }
    assert!(ft_gradient_check(0, true) > 1e-2);
}

#[test]
fn zero_parameters_give_uniform_probabilities() {
    let mut m = FtModel::init(FtConfig::default(), 4);
    m.embeddings.iter_mut().for_each(|x| *x = 0.0);
    let t = Tweet::new("a", "one two three");
    let (label, p) = m.predict(&t, &[]);
    assert_eq!(label, 0);
    assert!(p.iter().all(|&x| (x - 0.25).abs() < 1e-15));
    assert!(featurize_ft(&m.config, &Tweet::new("e", ""), &[]).is_empty());
}

#[test]
fn aux_slots_hash_apart() {
    let cfg = FtConfig::default();
    let t = Tweet::new("a", "");
    let w = AuxItem::Word("cat".into());
    let one = featurize_ft(&cfg, &t, &[w.clone(), w.clone()]);
    assert_ne!(one[0], one[1]);
    assert_ne!(one[0], bucket_of("cat", cfg.buckets));
}

#[test]
fn degenerate_labels_rejected() {
    let c = corpus(200, 1);
    let mut ds = build_task(TaskKind::Content, &c, &TaskConfig::default(), 1).unwrap();
    ds.instances.iter_mut().for_each(|i| i.label = 0);
    assert!(matches!(
        train_ft(&ds, &c, &FtConfig::default()),
        Err(ProbeError::DegenerateLabels)
    ));
}

#[test]
fn training_is_deterministic_and_persists() {
    let c = corpus(600, 2);
    let ds = build_task(TaskKind::Hashtag, &c, &TaskConfig::default(), 2).unwrap();
    let cfg = FtConfig {
        buckets: 4096,
        ..FtConfig::default()
    };
    let a = train_ft(&ds, &c, &cfg).unwrap().model;
    let b = train_ft(&ds, &c, &cfg).unwrap().model;
    assert_eq!(a, b);
    let mut buf = Vec::new();
    a.write(&mut buf).unwrap();
    let back = FtModel::read(buf.as_slice()).unwrap();
    assert_eq!(back, a);
    assert_eq!(
        evaluate_ft(&a, &ds, &c, Some(&ds.splits.test)).unwrap(),
        evaluate_ft(&back, &ds, &c, Some(&ds.splits.test)).unwrap()
    );
}

// Membership of an aux word is not a linear function of an averaged bag,
// so the FastText score on Content rests on word-frequency cues. It stays
// well above chance but below the BOW probe, which sees membership
// through its aux-match feature.
#[test]
fn content_above_chance_and_bow_above_090() {
    let c = corpus(3000, 3);
    let words = WordVecStore::empty(50);
    let mut cfg = PipelineConfig {
        seed: 3,
        ..PipelineConfig::default()
    };
    cfg.resolve_seeds();
    let ft = run_cell(&c, TaskKind::Content, &ModelChoice::FastText, &words, &cfg, None).unwrap();
    let bow = run_cell(&c, TaskKind::Content, &ModelChoice::Bow, &words, &cfg, None).unwrap();
    assert!(ft.metrics.macro_f1 >= 0.65, "fasttext {}", ft.metrics.macro_f1);
    assert!(bow.metrics.macro_f1 >= 0.90, "bow {}", bow.metrics.macro_f1);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn unigram_model_ignores_word_order(seed in any::<u64>(), n in 1usize..12) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let cfg = FtConfig { buckets: 512, dim: 6, max_n: 1, ..FtConfig::default() };
        let mut m = FtModel::init(cfg, 3);
        m.weights.iter_mut().for_each(|w| *w = rng.gen_range(-1.0..1.0));
        let mut words: Vec<String> = (0..n).map(|i| format!("w{}", rng.gen_range(0..20) + i)).collect();
        let a = m.predict(&Tweet::new("a", words.join(" ")), &[AuxItem::Word("x".into())]);
        words.shuffle(&mut rng);
        let b = m.predict(&Tweet::new("b", words.join(" ")), &[AuxItem::Word("x".into())]);
        prop_assert_eq!(a.0, b.0);
        for (p, q) in a.1.iter().zip(&b.1) {
            prop_assert!((p - q).abs() < 1e-12);
        }
        prop_assert!((a.1.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
    }
}
