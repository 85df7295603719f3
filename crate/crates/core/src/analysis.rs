//! Grids of (model, task) scores, length and size sensitivity, trend
//! labels, and model rankings.

use std::collections::BTreeMap;
use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::Corpus;
use crate::probe::{compute_metrics, Metrics, ProbeError};
use crate::taskgen::TaskKind;

#[derive(Debug, Error)]
pub enum AnalysisError {
    #[error("need at least 3 points to classify a trend, got {0}")]
    TooFewPoints(usize),
    #[error("metrics carry no instance records")]
    MissingInstanceRecords,
    #[error("tweet {0:?} from the metrics is not in the corpus")]
    UnknownTweet(String),
    #[error("no embeddings available for size {0}")]
    MissingSizeVariant(usize),
    #[error("duplicate cell ({model}, {task})")]
    DuplicateCell { model: String, task: TaskKind },
    #[error("score {0} is outside [0, 1]")]
    OutOfRange(f64),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error(transparent)]
    Probe(#[from] ProbeError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelCategory {
    Unsupervised,
    Supervised,
}

/// Supervised for the end-to-end baselines, unsupervised otherwise.
pub fn default_category(model: &str) -> ModelCategory {
    match model {
        "CNN" | "LSTM" | "BLSTM" | "FastText" => ModelCategory::Supervised,
        _ => ModelCategory::Unsupervised,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub f1: f64,
    pub seed: Option<u64>,
    pub config_hash: Option<String>,
}

/// Macro-F1 per (model, task), with each model's category.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct MetricsGrid {
    cells: BTreeMap<(String, TaskKind), Cell>,
    categories: BTreeMap<String, ModelCategory>,
}

impl MetricsGrid {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, model: &str, task: TaskKind, f1: f64) -> Result<(), AnalysisError> {
        self.insert_cell(
            model,
            task,
            Cell {
                f1,
                seed: None,
                config_hash: None,
            },
        )
    }

    pub fn insert_cell(&mut self, model: &str, task: TaskKind, cell: Cell) -> Result<(), AnalysisError> {
        if !(0.0..=1.0).contains(&cell.f1) {
            return Err(AnalysisError::OutOfRange(cell.f1));
        }
        let key = (model.to_string(), task);
        if self.cells.contains_key(&key) {
            return Err(AnalysisError::DuplicateCell {
                model: model.to_string(),
                task,
            });
        }
        self.cells.insert(key, cell);
        Ok(())
    }

    pub fn set_category(&mut self, model: &str, category: ModelCategory) {
        self.categories.insert(model.to_string(), category);
    }

    /// Category of a model: as set, else [`default_category`].
    pub fn category(&self, model: &str) -> ModelCategory {
        self.categories
            .get(model)
            .copied()
            .unwrap_or_else(|| default_category(model))
    }

    pub fn get(&self, model: &str, task: TaskKind) -> Option<f64> {
        self.cells.get(&(model.to_string(), task)).map(|c| c.f1)
    }

    pub fn cell(&self, model: &str, task: TaskKind) -> Option<&Cell> {
        self.cells.get(&(model.to_string(), task))
    }

    /// Distinct model names, sorted.
    pub fn models(&self) -> Vec<String> {
        let mut m: Vec<String> = self.cells.keys().map(|(m, _)| m.clone()).collect();
        m.dedup();
        m
    }

    pub fn tasks(&self) -> Vec<TaskKind> {
        let mut t: Vec<TaskKind> = self.cells.keys().map(|(_, t)| *t).collect();
        t.sort();
        t.dedup();
        t
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, TaskKind, f64)> {
        self.cells.iter().map(|((m, t), c)| (m.as_str(), *t, c.f1))
    }

    /// Same grid with every score passed through `f`.
    pub fn map_scores(&self, f: impl Fn(f64) -> f64) -> MetricsGrid {
        let mut g = self.clone();
        for c in g.cells.values_mut() {
            c.f1 = f(c.f1);
        }
        g
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrendLabel {
    PositivelyCorrelated,
    NegativelyCorrelated,
    Uncorrelated,
    Invariant,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrendConfig {
    /// Max minus min at or below this is Invariant.
    pub invariance_band: f64,
    /// |Spearman rho| at or above this is a correlation.
    pub rho_threshold: f64,
}

impl Default for TrendConfig {
    fn default() -> Self {
        TrendConfig {
            invariance_band: 0.02,
            rho_threshold: 0.5,
        }
    }
}

/// Ranks starting at 1, ties sharing the mean of their positions.
pub fn midranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            ranks[k] = r;
        }
        i = j + 1;
    }
    ranks
}

/// Spearman correlation of `values` against their position; 0 when the
/// values are all equal.
pub fn spearman_vs_index(values: &[f64]) -> f64 {
    let r = midranks(values);
    let n = r.len() as f64;
    let mi = (n + 1.0) / 2.0;
    let mr = r.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (i, &ri) in r.iter().enumerate() {
        let dx = i as f64 + 1.0 - mi;
        let dy = ri - mr;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if syy == 0.0 {
        0.0
    } else {
        sxy / (sxx * syy).sqrt()
    }
}

pub fn classify_trend(values: &[f64]) -> Result<TrendLabel, AnalysisError> {
    classify_trend_with(values, &TrendConfig::default())
}

pub fn classify_trend_with(values: &[f64], cfg: &TrendConfig) -> Result<TrendLabel, AnalysisError> {
    if values.len() < 3 {
        return Err(AnalysisError::TooFewPoints(values.len()));
    }
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    // tolerance for decimal inputs such as 0.51 - 0.49
    if max - min <= cfg.invariance_band + 1e-12 {
        return Ok(TrendLabel::Invariant);
    }
    let rho = spearman_vs_index(values);
    Ok(if rho >= cfg.rho_threshold {
        TrendLabel::PositivelyCorrelated
    } else if rho <= -cfg.rho_threshold {
        TrendLabel::NegativelyCorrelated
    } else {
        TrendLabel::Uncorrelated
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ranking {
    /// (model, F1), best first.
    pub order: Vec<(String, f64)>,
    pub best_unsupervised: Option<String>,
    pub best_supervised: Option<String>,
}

/// Models scored on `task`, by descending F1, ties alphabetical.
pub fn rank_models(grid: &MetricsGrid, task: TaskKind) -> Ranking {
    let mut order: Vec<(String, f64)> = grid
        .iter()
        .filter(|&(_, t, _)| t == task)
        .map(|(m, _, f)| (m.to_string(), f))
        .collect();
    order.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    let best = |cat| {
        order
            .iter()
            .find(|(m, _)| grid.category(m) == cat)
            .map(|(m, _)| m.clone())
    };
    Ranking {
        best_unsupervised: best(ModelCategory::Unsupervised),
        best_supervised: best(ModelCategory::Supervised),
        order,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LengthBin {
    pub bin: usize,
    /// Inclusive word-count range.
    pub min_words: usize,
    pub max_words: usize,
    pub support: usize,
    /// `None` when the bin has fewer than `min_support` instances.
    pub macro_f1: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SliceConfig {
    pub bin_width: usize,
    pub min_support: usize,
}

impl Default for SliceConfig {
    fn default() -> Self {
        SliceConfig {
            bin_width: 4,
            min_support: 50,
        }
    }
}

/// Groups the instance records by the tweet's word-count bin and scores
/// each bin. Every non-empty bin is listed with its support; bins below
/// `min_support` carry no score.
pub fn slice_by_length(metrics: &Metrics, corpus: &Corpus, cfg: SliceConfig) -> Result<Vec<LengthBin>, AnalysisError> {
    if cfg.bin_width == 0 {
        return Err(AnalysisError::InvalidParameter("bin_width must be positive".into()));
    }
    if metrics.instances.is_empty() {
        return Err(AnalysisError::MissingInstanceRecords);
    }
    let mut bins: BTreeMap<usize, (Vec<usize>, Vec<usize>)> = BTreeMap::new();
    for r in &metrics.instances {
        let t = corpus
            .get(&r.tweet_id)
            .ok_or_else(|| AnalysisError::UnknownTweet(r.tweet_id.clone()))?;
        let e = bins.entry(t.word_count() / cfg.bin_width).or_default();
        e.0.push(r.gold);
        e.1.push(r.predicted);
    }
    Ok(bins
        .into_iter()
        .map(|(bin, (gold, pred))| LengthBin {
            bin,
            min_words: bin * cfg.bin_width,
            max_words: (bin + 1) * cfg.bin_width - 1,
            support: gold.len(),
            macro_f1: (gold.len() >= cfg.min_support)
                .then(|| compute_metrics(&gold, &pred, metrics.class_count, &[]).macro_f1),
        })
        .collect())
}

/// Scored bins only, in bin order (input for [`classify_trend`]).
pub fn bin_scores(bins: &[LengthBin]) -> Vec<f64> {
    bins.iter().filter_map(|b| b.macro_f1).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SizePoint {
    pub size: usize,
    pub macro_f1: f64,
    pub support: usize,
}

pub const DEFAULT_SIZES: [usize; 5] = [10, 25, 50, 100, 200];

/// Runs `run(size)` for every size on a pool of `jobs` threads. Results
/// come back in the order of `sizes` whatever the completion order.
pub fn size_sweep<F, E>(sizes: &[usize], jobs: usize, run: F) -> Result<Vec<SizePoint>, E>
where
    F: Fn(usize) -> Result<Metrics, E> + Sync,
    E: Send + From<AnalysisError>,
{
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| E::from(AnalysisError::InvalidParameter(e.to_string())))?;
    let out: Vec<Result<SizePoint, E>> = pool.install(|| {
        sizes
            .par_iter()
            .map(|&size| {
                run(size).map(|m| SizePoint {
                    size,
                    macro_f1: m.macro_f1,
                    support: m.support.iter().sum::<u64>() as usize,
                })
            })
            .collect()
    });
    out.into_iter().collect()
}

/// CSV with header `model,task,bin,f1,support`; unscored bins have an
/// empty f1.
pub fn write_length_csv<W: Write>(out: W, model: &str, task: TaskKind, bins: &[LengthBin]) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["model", "task", "bin", "f1", "support"])?;
    for b in bins {
        w.write_record([
            model,
            task.name(),
            &b.bin.to_string(),
            &b.macro_f1.map(|f| f.to_string()).unwrap_or_default(),
            &b.support.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// CSV with header `model,task,size,f1,support`.
pub fn write_size_csv<W: Write>(out: W, model: &str, task: TaskKind, points: &[SizePoint]) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["model", "task", "size", "f1", "support"])?;
    for p in points {
        w.write_record([
            model,
            task.name(),
            &p.size.to_string(),
            &p.macro_f1.to_string(),
            &p.support.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn trend_examples() {
        assert_eq!(classify_trend(&[0.2, 0.4, 0.6, 0.8]).unwrap(), TrendLabel::PositivelyCorrelated);
        assert_eq!(classify_trend(&[0.8, 0.6, 0.4]).unwrap(), TrendLabel::NegativelyCorrelated);
        assert_eq!(classify_trend(&[0.50, 0.51, 0.505]).unwrap(), TrendLabel::Invariant);
        assert_eq!(classify_trend(&[0.5, 0.9, 0.5, 0.9, 0.5]).unwrap(), TrendLabel::Uncorrelated);
        assert!(matches!(classify_trend(&[0.1, 0.2]), Err(AnalysisError::TooFewPoints(2))));
    }

    #[test]
    fn midranks_share_ties() {
        assert_eq!(midranks(&[3.0, 1.0, 3.0, 2.0]), vec![3.5, 1.0, 3.5, 2.0]);
    }

    #[test]
    fn ranking_and_ties() {
        let mut g = MetricsGrid::new();
        g.insert("b", TaskKind::Length, 0.5).unwrap();
        g.insert("a", TaskKind::Length, 0.5).unwrap();
        g.insert("c", TaskKind::Length, 0.7).unwrap();
        g.set_category("c", ModelCategory::Supervised);
        let r = rank_models(&g, TaskKind::Length);
        let names: Vec<&str> = r.order.iter().map(|(m, _)| m.as_str()).collect();
        assert_eq!(names, vec!["c", "a", "b"]);
        assert_eq!(r.best_supervised.as_deref(), Some("c"));
        assert_eq!(r.best_unsupervised.as_deref(), Some("a"));
        assert!(matches!(
            g.insert("a", TaskKind::Length, 0.1),
            Err(AnalysisError::DuplicateCell { .. })
        ));
        assert!(matches!(g.insert("z", TaskKind::Length, 1.5), Err(AnalysisError::OutOfRange(_))));
    }

    fn brute_spearman(v: &[f64]) -> f64 {
        // Pearson on midranks computed by counting
        let n = v.len();
        let r: Vec<f64> = v
            .iter()
            .map(|&x| {
                let less = v.iter().filter(|&&y| y < x).count() as f64;
                let eq = v.iter().filter(|&&y| y == x).count() as f64;
                less + (eq + 1.0) / 2.0
            })
            .collect();
        let idx: Vec<f64> = (1..=n).map(|i| i as f64).collect();
        let mean = |a: &[f64]| a.iter().sum::<f64>() / a.len() as f64;
        let (mi, mr) = (mean(&idx), mean(&r));
        let cov: f64 = idx.iter().zip(&r).map(|(a, b)| (a - mi) * (b - mr)).sum();
        let va: f64 = idx.iter().map(|a| (a - mi).powi(2)).sum();
        let vb: f64 = r.iter().map(|b| (b - mr).powi(2)).sum();
        if vb == 0.0 {
            0.0
        } else {
            cov / (va * vb).sqrt()
        }
    }

    proptest! {
        #[test]
        fn spearman_matches_brute_force(v in proptest::collection::vec(0u8..6, 3..12)) {
            let v: Vec<f64> = v.into_iter().map(f64::from).collect();
            prop_assert!((spearman_vs_index(&v) - brute_spearman(&v)).abs() < 1e-12);
        }

        #[test]
        fn ranking_invariant_under_monotone_map(scores in proptest::collection::vec(0.0f64..1.0, 1..8)) {
            let mut g = MetricsGrid::new();
            for (i, s) in scores.iter().enumerate() {
                g.insert(&format!("m{i}"), TaskKind::Content, *s).unwrap();
            }
            let names = |r: Ranking| r.order.into_iter().map(|p| p.0).collect::<Vec<_>>();
            let a = names(rank_models(&g, TaskKind::Content));
            let b = names(rank_models(&g.map_scores(|x| x * x * 0.5 + 0.1), TaskKind::Content));
            prop_assert_eq!(a, b);
        }

    }
}
