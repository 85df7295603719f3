use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{Splits, TaskDataset, TaskError};

pub(crate) fn check_ratios(ratios: [f64; 3]) -> Result<(), TaskError> {
    let ok = ratios.iter().all(|r| r.is_finite() && *r >= 0.0)
        && (ratios.iter().sum::<f64>() - 1.0).abs() <= 1e-9;
    if ok {
        Ok(())
    } else {
        Err(TaskError::InvalidRatios(ratios))
    }
}

/// Per-class sizes for `n` items. Every split with a positive ratio gets at
/// least one item once the class has three or more.
fn class_sizes(n: usize, ratios: [f64; 3]) -> [usize; 3] {
    let train = ((ratios[0] * n as f64).round() as usize).min(n);
    let val = ((ratios[1] * n as f64).round() as usize).min(n - train);
    let mut sizes = [train, val, n - train - val];
    if n >= 3 {
        for idx in 0..3 {
            if ratios[idx] > 0.0 && sizes[idx] == 0 {
                let largest = (0..3)
                    .max_by_key(|&i| (sizes[i], std::cmp::Reverse(i)))
                    .unwrap();
                sizes[largest] -= 1;
                sizes[idx] += 1;
            }
        }
    }
    sizes
}

/// Label-stratified train/val/test split over instance indices.
pub fn stratified_split(
    labels: &[usize],
    class_count: usize,
    ratios: [f64; 3],
    seed: u64,
) -> Result<Splits, TaskError> {
    let groups: Vec<usize> = (0..labels.len()).collect();
    stratified_group_split(labels, &groups, class_count, ratios, seed)
}

/// Stratified split that keeps every group (e.g. all instances of one
/// tweet) inside a single split. Groups are stratified by their sorted
/// label multiset; with singleton groups this is [`stratified_split`].
pub fn stratified_group_split<G: Ord + Clone>(
    labels: &[usize],
    groups: &[G],
    class_count: usize,
    ratios: [f64; 3],
    seed: u64,
) -> Result<Splits, TaskError> {
    check_ratios(ratios)?;
    assert_eq!(labels.len(), groups.len(), "one group key per label");
    let mut members: BTreeMap<G, Vec<usize>> = BTreeMap::new();
    let mut first_seen: Vec<G> = Vec::new();
    for (i, g) in groups.iter().enumerate() {
        let entry = members.entry(g.clone()).or_default();
        if entry.is_empty() {
            first_seen.push(g.clone());
        }
        entry.push(i);
    }
    let mut strata: BTreeMap<Vec<usize>, Vec<&[usize]>> = BTreeMap::new();
    for g in &first_seen {
        let idx = &members[g];
        let mut sig: Vec<usize> = idx.iter().map(|&i| labels[i]).collect();
        sig.sort_unstable();
        debug_assert!(sig.iter().all(|&l| l < class_count));
        strata.entry(sig).or_default().push(idx);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut splits = Splits::default();
    for mut stratum in strata.into_values() {
        stratum.shuffle(&mut rng);
        let [train, val, _] = class_sizes(stratum.len(), ratios);
        for (k, idx) in stratum.into_iter().enumerate() {
            let target = if k < train {
                &mut splits.train
            } else if k < train + val {
                &mut splits.val
            } else {
                &mut splits.test
            };
            target.extend_from_slice(idx);
        }
    }
    splits.train.sort_unstable();
    splits.val.sort_unstable();
    splits.test.sort_unstable();
    Ok(splits)
}

/// Re-splits a dataset with new ratios.
pub fn split(mut dataset: TaskDataset, ratios: [f64; 3], seed: u64) -> Result<TaskDataset, TaskError> {
    let labels = dataset.labels();
    let groups: Vec<&str> = dataset.instances.iter().map(|i| i.tweet_id.as_str()).collect();
    dataset.splits = stratified_group_split(&labels, &groups, dataset.class_count, ratios, seed)?;
    Ok(dataset)
}
