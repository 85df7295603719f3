use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use super::{AuxItem, Provenance, Splits, TaskDataset, TaskError, TaskInstance, TaskKind};

#[derive(Serialize, Deserialize)]
struct InstanceRecord {
    tweet_id: String,
    aux: Vec<AuxItem>,
    label: usize,
    split: String,
}

/// Sidecar metadata written next to a dataset's JSONL file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetMeta {
    pub kind: TaskKind,
    pub class_count: usize,
    pub seed: u64,
    pub config_hash: String,
    pub corpus_id: String,
    pub instances: usize,
}

impl DatasetMeta {
    pub fn of(ds: &TaskDataset) -> Self {
        DatasetMeta {
            kind: ds.kind,
            class_count: ds.class_count,
            seed: ds.provenance.seed,
            config_hash: ds.provenance.config_hash.clone(),
            corpus_id: ds.provenance.corpus_id.clone(),
            instances: ds.instances.len(),
        }
    }
}

/// Writes instances as JSONL (one per line, in dataset order, each tagged
/// with its split) and returns the sidecar metadata.
pub fn write_dataset<W: Write>(ds: &TaskDataset, mut out: W) -> std::io::Result<DatasetMeta> {
    let mut split_of = vec![""; ds.instances.len()];
    for (name, idx) in [
        ("train", &ds.splits.train),
        ("val", &ds.splits.val),
        ("test", &ds.splits.test),
    ] {
        for &i in idx {
            split_of[i] = name;
        }
    }
    for (inst, split) in ds.instances.iter().zip(split_of) {
        let rec = InstanceRecord {
            tweet_id: inst.tweet_id.clone(),
            aux: inst.aux.clone(),
            label: inst.label,
            split: split.to_string(),
        };
        serde_json::to_writer(&mut out, &rec)?;
        out.write_all(b"\n")?;
    }
    Ok(DatasetMeta::of(ds))
}

pub fn read_dataset<R: BufRead>(reader: R, meta: &DatasetMeta) -> Result<TaskDataset, TaskError> {
    let mut instances = Vec::new();
    let mut splits = Splits::default();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let bad = |reason: String| TaskError::Malformed {
            line: i + 1,
            reason,
        };
        let rec: InstanceRecord = serde_json::from_str(&line).map_err(|e| bad(e.to_string()))?;
        if rec.label >= meta.class_count {
            return Err(bad(format!("label {} >= {}", rec.label, meta.class_count)));
        }
        if rec.aux.len() != meta.kind.arity() {
            return Err(bad(format!("aux arity {} != {}", rec.aux.len(), meta.kind.arity())));
        }
        let idx = instances.len();
        match rec.split.as_str() {
            "train" => splits.train.push(idx),
            "val" => splits.val.push(idx),
            "test" => splits.test.push(idx),
            other => return Err(bad(format!("unknown split {other:?}"))),
        }
        instances.push(TaskInstance {
            tweet_id: rec.tweet_id,
            aux: rec.aux,
            label: rec.label,
        });
    }
    Ok(TaskDataset {
        kind: meta.kind,
        instances,
        class_count: meta.class_count,
        splits,
        provenance: Provenance {
            corpus_id: meta.corpus_id.clone(),
            seed: meta.seed,
            config_hash: meta.config_hash.clone(),
        },
    })
}
