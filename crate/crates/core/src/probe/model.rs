use std::io::{BufRead, Write};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::adam::Adam;
use super::features::FeatureMatrix;
use super::metrics::{compute_metrics, Metrics};
use super::ProbeError;
use crate::hashing::config_hash;
use crate::taskgen::Splits;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    /// Epochs without a validation macro-F1 improvement before stopping.
    pub patience: usize,
    /// Coefficient of `0.5 * ||W||^2` (bias excluded).
    pub l2: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    /// Z-score columns stored in every train row (dense blocks) with
    /// train-split statistics during training. The scaling is folded back
    /// into the returned weights, so the model applies to raw features.
    pub standardize: bool,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 1e-3,
            batch_size: 64,
            max_epochs: 100,
            patience: 5,
            l2: 1e-5,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            standardize: true,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), ProbeError> {
        let ok = self.learning_rate > 0.0
            && self.batch_size > 0
            && self.max_epochs > 0
            && self.patience > 0
            && self.patience <= self.max_epochs
            && self.l2 >= 0.0
            && (0.0..1.0).contains(&self.beta1)
            && (0.0..1.0).contains(&self.beta2)
            && self.epsilon > 0.0;
        if ok {
            Ok(())
        } else {
            Err(ProbeError::InvalidConfig(format!("{self:?}")))
        }
    }

    pub fn hash(&self) -> String {
        config_hash(self)
    }
}

/// Linear softmax classifier over a feature matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbeModel {
    pub class_count: usize,
    pub feature_dim: usize,
    /// Row-major, `class_count x feature_dim`.
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
    pub seed: u64,
    pub config_hash: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Full-batch objective on the train split at the end of the epoch.
    pub train_loss: f64,
    /// Mean cross-entropy plus L2 on the validation split.
    pub val_loss: f64,
    pub val_macro_f1: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: ProbeModel,
    pub history: Vec<EpochRecord>,
    /// 1-based epoch whose parameters were kept.
    pub best_epoch: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub labels: Vec<usize>,
    pub probs: Vec<Vec<f64>>,
}

/// Softmax in place; returns the log of the normalizer relative to the max.
pub(crate) fn softmax(logits: &mut [f64]) {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut s = 0.0;
    for z in logits.iter_mut() {
        *z = (*z - max).exp();
        s += *z;
    }
    for z in logits.iter_mut() {
        *z /= s;
    }
}

/// Index of the largest value; ties go to the lowest index.
pub(crate) fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate().skip(1) {
        if x > v[best] {
            best = i;
        }
    }
    best
}

fn logits_into(w: &[f64], b: &[f64], dim: usize, idx: &[u32], val: &[f64], out: &mut [f64]) {
    for (c, o) in out.iter_mut().enumerate() {
        let row = &w[c * dim..(c + 1) * dim];
        let mut z = b[c];
        for (&j, &x) in idx.iter().zip(val) {
            z += row[j as usize] * x;
        }
        *o = z;
    }
}

fn l2_penalty(w: &[f64], l2: f64) -> f64 {
    0.5 * l2 * w.iter().map(|x| x * x).sum::<f64>()
}

/// Mean cross-entropy over `rows` plus the L2 term. When `grad` is given it
/// receives the gradient, laid out as weights followed by bias.
pub(crate) fn objective(
    w: &[f64],
    b: &[f64],
    x: &FeatureMatrix,
    labels: &[usize],
    rows: &[usize],
    l2: f64,
    mut grad: Option<&mut [f64]>,
) -> f64 {
    let c = b.len();
    let d = x.n_cols;
    let n = rows.len() as f64;
    let mut p = vec![0.0; c];
    let mut loss = 0.0;
    if let Some(g) = grad.as_deref_mut() {
        for (gi, wi) in g[..c * d].iter_mut().zip(w) {
            *gi = l2 * wi;
        }
        g[c * d..].iter_mut().for_each(|v| *v = 0.0);
    }
    for &r in rows {
        let (idx, val) = x.row(r);
        logits_into(w, b, d, idx, val, &mut p);
        softmax(&mut p);
        let y = labels[r];
        loss -= p[y].max(f64::MIN_POSITIVE).ln();
        if let Some(g) = grad.as_deref_mut() {
            for k in 0..c {
                let e = (p[k] - if k == y { 1.0 } else { 0.0 }) / n;
                if e == 0.0 {
                    continue;
                }
                let gr = &mut g[k * d..(k + 1) * d];
                for (&j, &xv) in idx.iter().zip(val) {
                    gr[j as usize] += e * xv;
                }
                g[c * d + k] += e;
            }
        }
    }
    loss / n + l2_penalty(w, l2)
}

fn predict_rows(w: &[f64], b: &[f64], x: &FeatureMatrix, rows: &[usize]) -> Vec<usize> {
    let mut p = vec![0.0; b.len()];
    rows.iter()
        .map(|&r| {
            let (idx, val) = x.row(r);
            logits_into(w, b, x.n_cols, idx, val, &mut p);
            argmax(&p)
        })
        .collect()
}

pub(crate) fn check_labels(labels: &[usize], train: &[usize], class_count: usize) -> Result<(), ProbeError> {
    if let Some(&bad) = labels.iter().find(|&&l| l >= class_count) {
        return Err(ProbeError::Shape(format!("label {bad} outside {class_count} classes")));
    }
    let first = train.first().map(|&i| labels[i]);
    if first.is_none() || train.iter().all(|&i| Some(labels[i]) == first) {
        return Err(ProbeError::DegenerateLabels);
    }
    Ok(())
}

/// Per-column `(mean, std)` over `rows` for columns stored in every one of
/// those rows; `None` for the rest. A zero std becomes 1.
fn dense_column_stats(x: &FeatureMatrix, rows: &[usize]) -> Vec<Option<(f64, f64)>> {
    let d = x.n_cols;
    let mut count = vec![0usize; d];
    let mut sum = vec![0.0; d];
    for &r in rows {
        let (idx, val) = x.row(r);
        for (&j, &v) in idx.iter().zip(val) {
            count[j as usize] += 1;
            sum[j as usize] += v;
        }
    }
    let n = rows.len();
    let mean: Vec<f64> = sum.iter().map(|s| s / n as f64).collect();
    let mut sq = vec![0.0; d];
    for &r in rows {
        let (idx, val) = x.row(r);
        for (&j, &v) in idx.iter().zip(val) {
            let dv = v - mean[j as usize];
            sq[j as usize] += dv * dv;
        }
    }
    (0..d)
        .map(|j| {
            (n > 0 && count[j] == n).then(|| {
                let sd = (sq[j] / n as f64).sqrt();
                (mean[j], if sd > 0.0 { sd } else { 1.0 })
            })
        })
        .collect()
}

fn standardized(x: &FeatureMatrix, stats: &[Option<(f64, f64)>]) -> FeatureMatrix {
    let mut out = x.clone();
    out.map_values(|j, v| match stats[j] {
        Some((m, s)) => (v - m) / s,
        None => v,
    });
    out
}

/// Rewrites parameters trained on standardized columns so they apply to
/// the raw features.
fn unstandardize(theta: &mut [f64], c: usize, d: usize, stats: &[Option<(f64, f64)>]) {
    let (w, b) = theta.split_at_mut(c * d);
    for k in 0..c {
        let row = &mut w[k * d..(k + 1) * d];
        for (j, st) in stats.iter().enumerate() {
            if let Some((m, s)) = *st {
                row[j] /= s;
                b[k] -= row[j] * m;
            }
        }
    }
}

/// Trains a softmax probe with minibatch Adam on `splits.train`, stopping
/// early on validation macro-F1 and keeping the best epoch's parameters.
pub fn train(
    x: &FeatureMatrix,
    labels: &[usize],
    splits: &Splits,
    class_count: usize,
    cfg: &TrainConfig,
) -> Result<TrainOutcome, ProbeError> {
    cfg.validate()?;
    if labels.len() != x.n_rows() {
        return Err(ProbeError::Shape(format!(
            "{} labels for {} rows",
            labels.len(),
            x.n_rows()
        )));
    }
    check_labels(labels, &splits.train, class_count)?;
    let stats = if cfg.standardize {
        dense_column_stats(x, &splits.train)
    } else {
        Vec::new()
    };
    let scaled;
    let x = if stats.iter().any(Option::is_some) {
        scaled = standardized(x, &stats);
        &scaled
    } else {
        x
    };
    let d = x.n_cols;
    let c = class_count;
    let mut theta = vec![0.0; c * d + c];
    let mut grad = vec![0.0; c * d + c];
    let mut adam = Adam::new(theta.len(), cfg.learning_rate, cfg.beta1, cfg.beta2, cfg.epsilon);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let val_rows = if splits.val.is_empty() { &splits.train } else { &splits.val };
    let val_gold: Vec<usize> = val_rows.iter().map(|&i| labels[i]).collect();
    let mut order = splits.train.clone();
    let mut history = Vec::new();
    let mut best = (f64::NEG_INFINITY, f64::INFINITY, 0usize, theta.clone());
    for epoch in 1..=cfg.max_epochs {
        order.shuffle(&mut rng);
        for batch in order.chunks(cfg.batch_size) {
            let (w, b) = theta.split_at(c * d);
            let loss = objective(w, b, x, labels, batch, cfg.l2, Some(&mut grad));
            if !loss.is_finite() {
                return Err(ProbeError::NonFiniteLoss { epoch });
            }
            adam.step(&mut theta, &grad);
        }
        let (w, b) = theta.split_at(c * d);
        let train_loss = objective(w, b, x, labels, &splits.train, cfg.l2, None);
        if !train_loss.is_finite() || theta.iter().any(|v| !v.is_finite()) {
            return Err(ProbeError::NonFiniteLoss { epoch });
        }
        let val_loss = objective(w, b, x, labels, val_rows, cfg.l2, None);
        let pred = predict_rows(w, b, x, val_rows);
        let f1 = compute_metrics(&val_gold, &pred, c, &[]).macro_f1;
        history.push(EpochRecord {
            epoch,
            train_loss,
            val_loss,
            val_macro_f1: f1,
        });
        // Macro-F1 decides; equal F1 with lower validation loss still counts
        // as progress so flat F1 plateaus do not end training early.
        if f1 > best.0 || (f1 == best.0 && val_loss < best.1) {
            best = (f1, val_loss, epoch, theta.clone());
        } else if epoch - best.2 >= cfg.patience {
            break;
        }
    }
    let (_, _, best_epoch, mut theta) = best;
    if !stats.is_empty() {
        unstandardize(&mut theta, c, d, &stats);
    }
    let (w, b) = theta.split_at(c * d);
    Ok(TrainOutcome {
        model: ProbeModel {
            class_count: c,
            feature_dim: d,
            weights: w.to_vec(),
            bias: b.to_vec(),
            seed: cfg.seed,
            config_hash: cfg.hash(),
        },
        history,
        best_epoch,
    })
}

impl ProbeModel {
    /// All-zero parameters.
    pub fn zeros(class_count: usize, feature_dim: usize) -> Self {
        ProbeModel {
            class_count,
            feature_dim,
            weights: vec![0.0; class_count * feature_dim],
            bias: vec![0.0; class_count],
            seed: 0,
            config_hash: String::new(),
        }
    }

    pub fn logits(&self, x: &FeatureMatrix, row: usize) -> Vec<f64> {
        let mut out = vec![0.0; self.class_count];
        let (idx, val) = x.row(row);
        logits_into(&self.weights, &self.bias, self.feature_dim, idx, val, &mut out);
        out
    }

    pub fn predict(&self, x: &FeatureMatrix) -> Result<Prediction, ProbeError> {
        self.check_dim(x)?;
        let mut labels = Vec::with_capacity(x.n_rows());
        let mut probs = Vec::with_capacity(x.n_rows());
        for r in 0..x.n_rows() {
            let mut p = self.logits(x, r);
            labels.push(argmax(&p));
            softmax(&mut p);
            probs.push(p);
        }
        Ok(Prediction { labels, probs })
    }

    /// Scores the model on `rows` (all rows when `None`).
    pub fn evaluate(
        &self,
        x: &FeatureMatrix,
        labels: &[usize],
        ids: &[String],
        rows: Option<&[usize]>,
    ) -> Result<Metrics, ProbeError> {
        self.check_dim(x)?;
        let all: Vec<usize>;
        let rows = match rows {
            Some(r) => r,
            None => {
                all = (0..x.n_rows()).collect();
                &all
            }
        };
        let pred = predict_rows(&self.weights, &self.bias, x, rows);
        let gold: Vec<usize> = rows.iter().map(|&i| labels[i]).collect();
        let ids: Vec<String> = if ids.is_empty() {
            Vec::new()
        } else {
            rows.iter().map(|&i| ids[i].clone()).collect()
        };
        Ok(compute_metrics(&gold, &pred, self.class_count, &ids))
    }

    fn check_dim(&self, x: &FeatureMatrix) -> Result<(), ProbeError> {
        if x.n_cols != self.feature_dim {
            return Err(ProbeError::Shape(format!(
                "model expects {} features, got {}",
                self.feature_dim, x.n_cols
            )));
        }
        Ok(())
    }

    pub fn write<W: Write>(&self, out: W) -> std::io::Result<()> {
        let header = ModelHeader {
            kind: "probe".into(),
            class_count: self.class_count,
            feature_dim: self.feature_dim,
            seed: self.seed,
            config_hash: self.config_hash.clone(),
            extra: serde_json::Value::Null,
        };
        write_rows(out, &header, &self.weights, self.feature_dim, &[&self.bias])
    }

    pub fn read<R: BufRead>(reader: R) -> Result<Self, ProbeError> {
        let (header, mut blocks) = read_rows(reader, "probe", 1)?;
        let weights = blocks.remove(0);
        let bias = blocks.remove(0);
        if weights.len() != header.class_count * header.feature_dim || bias.len() != header.class_count {
            return Err(ProbeError::Malformed("parameter shapes disagree with header".into()));
        }
        Ok(ProbeModel {
            class_count: header.class_count,
            feature_dim: header.feature_dim,
            weights,
            bias,
            seed: header.seed,
            config_hash: header.config_hash,
        })
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub(crate) struct ModelHeader {
    pub kind: String,
    pub class_count: usize,
    pub feature_dim: usize,
    pub seed: u64,
    pub config_hash: String,
    #[serde(default, skip_serializing_if = "serde_json::Value::is_null")]
    pub extra: serde_json::Value,
}

/// Text layout: one JSON header line, the main matrix as `class_count`
/// lines of `width` floats, then one line per extra vector.
pub(crate) fn write_rows<W: Write>(
    mut out: W,
    header: &ModelHeader,
    matrix: &[f64],
    width: usize,
    extra: &[&[f64]],
) -> std::io::Result<()> {
    serde_json::to_writer(&mut out, header)?;
    out.write_all(b"\n")?;
    let line = |out: &mut W, v: &[f64]| -> std::io::Result<()> {
        let s: Vec<String> = v.iter().map(|x| format!("{x:?}")).collect();
        out.write_all(s.join(" ").as_bytes())?;
        out.write_all(b"\n")
    };
    if width > 0 {
        for row in matrix.chunks(width) {
            line(&mut out, row)?;
        }
    } else {
        for _ in 0..header.class_count {
            line(&mut out, &[])?;
        }
    }
    for v in extra {
        line(&mut out, v)?;
    }
    Ok(())
}

/// Inverse of [`write_rows`]: returns the header, the flattened matrix,
/// then `n_extra` vectors.
pub(crate) fn read_rows<R: BufRead>(
    reader: R,
    kind: &str,
    n_extra: usize,
) -> Result<(ModelHeader, Vec<Vec<f64>>), ProbeError> {
    let mut lines = reader.lines();
    let first = lines
        .next()
        .ok_or_else(|| ProbeError::Malformed("empty model file".into()))??;
    let header: ModelHeader =
        serde_json::from_str(&first).map_err(|e| ProbeError::Malformed(format!("header: {e}")))?;
    if header.kind != kind {
        return Err(ProbeError::Malformed(format!("expected a {kind} model, found {}", header.kind)));
    }
    let mut parse = |what: &str| -> Result<Vec<f64>, ProbeError> {
        let l = lines
            .next()
            .ok_or_else(|| ProbeError::Malformed(format!("missing {what}")))??;
        l.split_whitespace()
            .map(|t| match t.parse::<f64>() {
                Ok(v) if v.is_finite() => Ok(v),
                _ => Err(ProbeError::Malformed(format!("bad value {t:?} in {what}"))),
            })
            .collect()
    };
    let mut matrix = Vec::with_capacity(header.class_count * header.feature_dim);
    for r in 0..header.class_count {
        let row = parse("matrix row")?;
        if row.len() != header.feature_dim {
            return Err(ProbeError::Malformed(format!(
                "row {r} has {} values, expected {}",
                row.len(),
                header.feature_dim
            )));
        }
        matrix.extend(row);
    }
    let mut blocks = vec![matrix];
    for _ in 0..n_extra {
        blocks.push(parse("vector")?);
    }
    Ok((header, blocks))
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct GradCheckOptions {
    /// Evaluate at all-zero parameters instead of a random point.
    pub zero_point: bool,
    /// Negate the largest analytic gradient component before comparing.
    pub corrupt: bool,
}

/// Largest relative error `|a - n| / max(|a| + |n|, 1e-6)` between the
/// analytic gradient and central differences (step 1e-5) on a random
/// problem with 3 classes, 7 features and 20 samples.
pub fn gradient_check(cfg: &TrainConfig, seed: u64) -> f64 {
    gradient_check_with(cfg, seed, GradCheckOptions::default())
}

pub fn gradient_check_with(cfg: &TrainConfig, seed: u64, opts: GradCheckOptions) -> f64 {
    let (c, d, n) = (3, 7, 20);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rows: Vec<Vec<f64>> = (0..n)
        .map(|_| (0..d).map(|_| rng.sample::<f64, _>(StandardNormal)).collect())
        .collect();
    let x = FeatureMatrix::from_dense(&rows);
    let labels: Vec<usize> = (0..n).map(|_| rng.gen_range(0..c)).collect();
    let all: Vec<usize> = (0..n).collect();
    let mut theta: Vec<f64> = if opts.zero_point {
        vec![0.0; c * d + c]
    } else {
        (0..c * d + c).map(|_| 0.5 * rng.sample::<f64, _>(StandardNormal)).collect()
    };
    // a larger penalty than the default so its gradient is visible
    let l2 = cfg.l2.max(1e-2);
    let mut analytic = vec![0.0; theta.len()];
    {
        let (w, b) = theta.split_at(c * d);
        objective(w, b, &x, &labels, &all, l2, Some(&mut analytic));
    }
    if opts.corrupt {
        let k = argmax(&analytic.iter().map(|g| g.abs()).collect::<Vec<_>>());
        analytic[k] = -analytic[k];
    }
    let h = 1e-5;
    let mut worst: f64 = 0.0;
    for k in 0..theta.len() {
        let orig = theta[k];
        theta[k] = orig + h;
        let (w, b) = theta.split_at(c * d);
        let fp = objective(w, b, &x, &labels, &all, l2, None);
        theta[k] = orig - h;
        let (w, b) = theta.split_at(c * d);
        let fm = objective(w, b, &x, &labels, &all, l2, None);
        theta[k] = orig;
        let num = (fp - fm) / (2.0 * h);
        let a = analytic[k];
        worst = worst.max((a - num).abs() / (a.abs() + num.abs()).max(1e-6));
    }
    worst
}
