use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use tweetprobe::probe::{train, FeatureMatrix, ProbeModel, TrainConfig};
use tweetprobe::taskgen::{stratified_split, Splits};

fn gaussians(n: usize, seed: u64) -> (FeatureMatrix, Vec<usize>, Splits) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rows = Vec::new();
    let mut labels = Vec::new();
    for i in 0..n {
        let y = i % 2;
        let c = if y == 0 { -3.0 } else { 3.0 };
        let a: f64 = rng.sample(StandardNormal);
        let b: f64 = rng.sample(StandardNormal);
        rows.push(vec![c + a, c + b]);
        labels.push(y);
    }
    let splits = stratified_split(&labels, 2, [0.7, 0.1, 0.2], seed).unwrap();
    (FeatureMatrix::from_dense(&rows), labels, splits)
}

#[test]
fn separated_gaussians_are_learned() {
    let (x, y, s) = gaussians(1000, 1);
    let out = train(&x, &y, &s, 2, &TrainConfig::default()).unwrap();
    let m = out.model.evaluate(&x, &y, &[], Some(&s.test)).unwrap();
    assert!(m.macro_f1 >= 0.99, "{}", m.macro_f1);
}

#[test]
fn same_seed_same_weights() {
    let (x, y, s) = gaussians(400, 2);
    let cfg = TrainConfig {
        seed: 9,
        ..TrainConfig::default()
    };
    let a = train(&x, &y, &s, 2, &cfg).unwrap().model;
    let b = train(&x, &y, &s, 2, &cfg).unwrap().model;
    let bits = |m: &ProbeModel| m.weights.iter().chain(&m.bias).map(|v| v.to_bits()).collect::<Vec<_>>();
    assert_eq!(bits(&a), bits(&b));
}

#[test]
fn loss_has_no_sustained_increase() {
    let (x, y, s) = gaussians(600, 3);
    let cfg = TrainConfig {
        max_epochs: 40,
        patience: 40,
        ..TrainConfig::default()
    };
    let h = train(&x, &y, &s, 2, &cfg).unwrap().history;
    for w in h.windows(6) {
        let rising = w.windows(2).all(|p| p[1].train_loss > p[0].train_loss + 1e-6);
        assert!(!rising, "loss rose over epochs {}..{}", w[0].epoch, w[5].epoch);
    }
    assert!(h.last().unwrap().train_loss < h[0].train_loss);
}

#[test]
fn standardized_training_applies_to_raw_features() {
    // One informative column on a large offset and scale.
    let rows: Vec<Vec<f64>> = (0..300).map(|i| vec![1000.0 + 50.0 * (i % 3) as f64, 1.0]).collect();
    let y: Vec<usize> = (0..300).map(|i| i % 3).collect();
    let s = stratified_split(&y, 3, [0.7, 0.1, 0.2], 0).unwrap();
    let x = FeatureMatrix::from_dense(&rows);
    let cfg = TrainConfig {
        learning_rate: 0.05,
        ..TrainConfig::default()
    };
    let m = train(&x, &y, &s, 3, &cfg).unwrap().model;
    assert_eq!(m.evaluate(&x, &y, &[], None).unwrap().macro_f1, 1.0);
}

#[test]
fn persisted_model_reproduces_scores() {
    let (x, y, s) = gaussians(300, 4);
    let m = train(&x, &y, &s, 2, &TrainConfig::default()).unwrap().model;
    let mut buf = Vec::new();
    m.write(&mut buf).unwrap();
    let back = ProbeModel::read(buf.as_slice()).unwrap();
    assert_eq!(back, m);
    let a = m.evaluate(&x, &y, &[], Some(&s.test)).unwrap();
    let b = back.evaluate(&x, &y, &[], Some(&s.test)).unwrap();
    assert_eq!(a, b);
}

fn random_model(classes: usize, dim: usize, seed: u64) -> (ProbeModel, FeatureMatrix) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut m = ProbeModel::zeros(classes, dim);
    m.weights.iter_mut().for_each(|w| *w = rng.gen_range(-3.0..3.0));
    m.bias.iter_mut().for_each(|b| *b = rng.gen_range(-3.0..3.0));
    let rows: Vec<Vec<f64>> = (0..20)
        .map(|_| (0..dim).map(|_| rng.gen_range(-5.0..5.0)).collect())
        .collect();
    (m, FeatureMatrix::from_dense(&rows))
}

proptest! {
    #[test]
    fn probabilities_sum_to_one(classes in 2usize..8, dim in 1usize..10, seed in any::<u64>()) {
        let (m, x) = random_model(classes, dim, seed);
        for p in m.predict(&x).unwrap().probs {
            prop_assert!((p.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
        }
    }

    #[test]
    fn argmax_ignores_logit_shift(classes in 2usize..8, dim in 1usize..10, seed in any::<u64>(), shift in -50.0f64..50.0) {
        let (m, x) = random_model(classes, dim, seed);
        let mut shifted = m.clone();
        shifted.bias.iter_mut().for_each(|b| *b += shift);
        prop_assert_eq!(m.predict(&x).unwrap().labels, shifted.predict(&x).unwrap().labels);
    }

    #[test]
    fn micro_f1_is_accuracy(classes in 2usize..6, seed in any::<u64>()) {
        let (m, x) = random_model(classes, 4, seed);
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 1);
        let gold: Vec<usize> = (0..x.n_rows()).map(|_| rng.gen_range(0..classes)).collect();
        let met = m.evaluate(&x, &gold, &[], None).unwrap();
        let pred = m.predict(&x).unwrap().labels;
        let acc = gold.iter().zip(&pred).filter(|(a, b)| a == b).count() as f64 / gold.len() as f64;
        prop_assert_eq!(met.micro_f1, acc);
    }
}
