use std::io::Write;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InstanceRecord {
    pub tweet_id: String,
    pub predicted: usize,
    pub gold: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub class_count: usize,
    pub precision: Vec<f64>,
    pub recall: Vec<f64>,
    pub f1: Vec<f64>,
    pub support: Vec<u64>,
    /// Mean F1 over classes that occur in gold or predicted labels.
    pub macro_f1: f64,
    /// Equal to accuracy for single-label classification.
    pub micro_f1: f64,
    /// `confusion[gold][predicted]`
    pub confusion: Vec<Vec<u64>>,
    pub instances: Vec<InstanceRecord>,
}

fn ratio(a: u64, b: u64) -> f64 {
    if b == 0 {
        0.0
    } else {
        a as f64 / b as f64
    }
}

/// Scores predictions against gold labels. `ids` may be empty, in which
/// case no instance records are kept.
pub fn compute_metrics(gold: &[usize], predicted: &[usize], class_count: usize, ids: &[String]) -> Metrics {
    assert_eq!(gold.len(), predicted.len());
    let mut confusion = vec![vec![0u64; class_count]; class_count];
    for (&g, &p) in gold.iter().zip(predicted) {
        confusion[g][p] += 1;
    }
    let mut precision = Vec::with_capacity(class_count);
    let mut recall = Vec::with_capacity(class_count);
    let mut f1 = Vec::with_capacity(class_count);
    let mut support = Vec::with_capacity(class_count);
    let (mut present, mut f1_sum, mut correct) = (0usize, 0.0, 0u64);
    for c in 0..class_count {
        let tp = confusion[c][c];
        let gold_c: u64 = confusion[c].iter().sum();
        let pred_c: u64 = confusion.iter().map(|r| r[c]).sum();
        let p = ratio(tp, pred_c);
        let r = ratio(tp, gold_c);
        let f = if p + r == 0.0 { 0.0 } else { 2.0 * p * r / (p + r) };
        precision.push(p);
        recall.push(r);
        f1.push(f);
        support.push(gold_c);
        correct += tp;
        if gold_c + pred_c > 0 {
            present += 1;
            f1_sum += f;
        }
    }
    let instances = if ids.is_empty() {
        Vec::new()
    } else {
        ids.iter()
            .zip(gold.iter().zip(predicted))
            .map(|(id, (&g, &p))| InstanceRecord {
                tweet_id: id.clone(),
                predicted: p,
                gold: g,
            })
            .collect()
    };
    Metrics {
        class_count,
        precision,
        recall,
        f1,
        support,
        macro_f1: if present == 0 { 0.0 } else { f1_sum / present as f64 },
        micro_f1: ratio(correct, gold.len() as u64),
        confusion,
        instances,
    }
}

impl Metrics {
    pub fn accuracy(&self) -> f64 {
        self.micro_f1
    }

    /// Per-class table: `class,precision,recall,f1,support`, then a
    /// `macro` and `micro` row.
    pub fn write_csv<W: Write>(&self, out: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["class", "precision", "recall", "f1", "support"])?;
        for c in 0..self.class_count {
            w.write_record([
                c.to_string(),
                self.precision[c].to_string(),
                self.recall[c].to_string(),
                self.f1[c].to_string(),
                self.support[c].to_string(),
            ])?;
        }
        let n: u64 = self.support.iter().sum();
        w.write_record(["macro", "", "", &self.macro_f1.to_string(), &n.to_string()])?;
        w.write_record(["micro", "", "", &self.micro_f1.to_string(), &n.to_string()])?;
        w.flush()?;
        Ok(())
    }
}
