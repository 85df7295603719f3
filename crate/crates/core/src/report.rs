//! Table rendering, the bundled reference grid, and grid comparison.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use crate::analysis::default_category;
use crate::analysis::{AnalysisError, MetricsGrid, ModelCategory};
use crate::hashing::sha256_hex;
use crate::taskgen::TaskKind;

const REFERENCE_CSV: &str = include_str!("../data/reference_scores.csv");
const REFERENCE_SHA256: &str = "0bb272cf82f8e9a3d817ff84c6ea4de041253994e43a0c17717883ea9304db43";

/// Row order of the reference table; other models follow alphabetically.
pub const REFERENCE_MODELS: [&str; 13] = [
    "BOW", "LDA", "BOM", "DSSM", "CDSSM", "PV", "STV", "T2V", "SCBOW", "CNN", "LSTM", "BLSTM", "FastText",
];

pub const REFERENCE_NOTE: &str =
    "Reference scores are published values on the original Twitter data; they are a reference, not a reproduction target.";

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("bundled reference table failed its checksum")]
    Checksum,
    #[error("line {line}: {reason}")]
    Malformed { line: usize, reason: String },
    #[error(transparent)]
    Analysis(#[from] AnalysisError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum GridFormat {
    Markdown,
    Csv,
}

fn parse_reference(text: &str) -> Result<MetricsGrid, ReportError> {
    let mut grid = MetricsGrid::new();
    let mut rdr = csv::Reader::from_reader(text.as_bytes());
    for (i, rec) in rdr.records().enumerate() {
        let line = i + 2;
        let bad = |reason: String| ReportError::Malformed { line, reason };
        let rec = rec.map_err(|e| bad(e.to_string()))?;
        if rec.len() != 4 {
            return Err(bad("expected model,category,task,percent".into()));
        }
        let task: TaskKind = rec[2].parse().map_err(|_| bad(format!("unknown task {:?}", &rec[2])))?;
        let category = match &rec[1] {
            "supervised" => ModelCategory::Supervised,
            "unsupervised" => ModelCategory::Unsupervised,
            c => return Err(bad(format!("unknown category {c:?}"))),
        };
        let pct: f64 = rec[3].parse().map_err(|_| bad(format!("bad number {:?}", &rec[3])))?;
        grid.insert(&rec[0], task, pct / 100.0)?;
        grid.set_category(&rec[0], category);
    }
    Ok(grid)
}

/// The published 13 x 13 grid, verified against its checksum.
pub fn load_paper_reference() -> Result<MetricsGrid, ReportError> {
    if sha256_hex(REFERENCE_CSV.as_bytes()) != REFERENCE_SHA256 {
        return Err(ReportError::Checksum);
    }
    parse_reference(REFERENCE_CSV)
}

fn row_order(grid: &MetricsGrid) -> Vec<String> {
    let mut models = grid.models();
    models.sort_by_key(|m| {
        let pos = REFERENCE_MODELS.iter().position(|r| r == m).unwrap_or(usize::MAX);
        (grid.category(m), pos, m.clone())
    });
    models
}

/// Per-task set of models holding the column maximum.
pub fn column_best(grid: &MetricsGrid) -> BTreeMap<TaskKind, Vec<String>> {
    let mut out = BTreeMap::new();
    for task in TaskKind::ALL {
        let scores: Vec<(&str, f64)> = grid
            .iter()
            .filter(|&(_, t, _)| t == task)
            .map(|(m, _, f)| (m, f))
            .collect();
        let Some(max) = scores.iter().map(|s| s.1).reduce(f64::max) else {
            continue;
        };
        out.insert(
            task,
            scores.iter().filter(|s| s.1 == max).map(|s| s.0.to_string()).collect(),
        );
    }
    out
}

/// Markdown: models as rows (unsupervised block first), the 13 tasks as
/// columns, percent with 2 decimals, column maxima in bold. CSV: one
/// `model,task,f1` row per cell with f1 as a fraction.
pub fn render_grid(grid: &MetricsGrid, format: GridFormat) -> String {
    match format {
        GridFormat::Markdown => render_markdown(grid),
        GridFormat::Csv => render_csv(grid),
    }
}

fn render_markdown(grid: &MetricsGrid) -> String {
    let best = column_best(grid);
    let mut s = String::from("| Model |");
    for t in TaskKind::ALL {
        let _ = write!(s, " {} |", t.title());
    }
    s.push_str("\n|---|");
    for _ in TaskKind::ALL {
        s.push_str("---:|");
    }
    s.push('\n');
    for m in row_order(grid) {
        let _ = write!(s, "| {m} |");
        for t in TaskKind::ALL {
            match grid.get(&m, t) {
                None => s.push_str(" - |"),
                Some(f) => {
                    let cell = format!("{:.2}", f * 100.0);
                    if best.get(&t).is_some_and(|b| b.contains(&m)) {
                        let _ = write!(s, " **{cell}** |");
                    } else {
                        let _ = write!(s, " {cell} |");
                    }
                }
            }
        }
        s.push('\n');
    }
    s
}

fn render_csv(grid: &MetricsGrid) -> String {
    let mut s = String::from("model,task,f1\n");
    for m in row_order(grid) {
        for t in TaskKind::ALL {
            if let Some(f) = grid.get(&m, t) {
                let _ = writeln!(s, "{m},{},{f}", t.name());
            }
        }
    }
    s
}

/// Reads the `model,task,f1` CSV written by [`render_grid`]. Categories
/// come from [`default_category`].
pub fn parse_grid_csv(text: &str) -> Result<MetricsGrid, ReportError> {
    let mut grid = MetricsGrid::new();
    let mut rdr = csv::Reader::from_reader(text.as_bytes());
    let header = rdr.headers().map_err(|e| ReportError::Malformed {
        line: 1,
        reason: e.to_string(),
    })?;
    if header != vec!["model", "task", "f1"] {
        return Err(ReportError::Malformed {
            line: 1,
            reason: "header must be model,task,f1".into(),
        });
    }
    for (i, rec) in rdr.records().enumerate() {
        let line = i + 2;
        let bad = |reason: String| ReportError::Malformed { line, reason };
        let rec = rec.map_err(|e| bad(e.to_string()))?;
        let task: TaskKind = rec[1].parse().map_err(|_| bad(format!("unknown task {:?}", &rec[1])))?;
        let f1: f64 = rec[2].parse().map_err(|_| bad(format!("bad number {:?}", &rec[2])))?;
        grid.insert(&rec[0], task, f1)?;
    }
    Ok(grid)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellDelta {
    pub model: String,
    pub task: TaskKind,
    pub ours: f64,
    pub reference: f64,
    /// ours - reference
    pub delta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskAgreement {
    pub task: TaskKind,
    pub models: usize,
    /// Kendall tau-b between the two model orderings; `None` below two
    /// shared models or when either side is all ties.
    pub kendall_tau: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridDiff {
    pub deltas: Vec<CellDelta>,
    pub per_task: Vec<TaskAgreement>,
    pub mean_agreement: Option<f64>,
    pub warning: Option<String>,
}

/// Kendall tau-b over paired observations.
pub fn kendall_tau_b(x: &[f64], y: &[f64]) -> Option<f64> {
    let n = x.len();
    let (mut conc, mut disc, mut tx, mut ty) = (0i64, 0i64, 0i64, 0i64);
    for i in 0..n {
        for j in i + 1..n {
            let a = (x[i] - x[j]).partial_cmp(&0.0)? as i64;
            let b = (y[i] - y[j]).partial_cmp(&0.0)? as i64;
            match (a, b) {
                (0, 0) => {}
                (0, _) => tx += 1,
                (_, 0) => ty += 1,
                _ if a == b => conc += 1,
                _ => disc += 1,
            }
        }
    }
    let d = (((conc + disc + tx) * (conc + disc + ty)) as f64).sqrt();
    (d > 0.0).then(|| (conc - disc) as f64 / d)
}

/// Per-cell deltas on shared (model, task) cells and per-task rank
/// agreement between the two grids.
pub fn diff_grids(ours: &MetricsGrid, reference: &MetricsGrid) -> GridDiff {
    let mut deltas = Vec::new();
    let mut per_task = Vec::new();
    for task in TaskKind::ALL {
        let mut a = Vec::new();
        let mut b = Vec::new();
        for m in row_order(ours) {
            if let (Some(x), Some(y)) = (ours.get(&m, task), reference.get(&m, task)) {
                deltas.push(CellDelta {
                    model: m.clone(),
                    task,
                    ours: x,
                    reference: y,
                    delta: x - y,
                });
                a.push(x);
                b.push(y);
            }
        }
        if !a.is_empty() {
            per_task.push(TaskAgreement {
                task,
                models: a.len(),
                kendall_tau: if a.len() >= 2 { kendall_tau_b(&a, &b) } else { None },
            });
        }
    }
    let taus: Vec<f64> = per_task.iter().filter_map(|t| t.kendall_tau).collect();
    let warning = if deltas.is_empty() {
        Some("no (model, task) cells in common; nothing to compare".to_string())
    } else if taus.is_empty() {
        Some("fewer than two shared models per task; rank agreement undefined".to_string())
    } else {
        None
    };
    if let Some(w) = &warning {
        log::warn!("{w}");
    }
    GridDiff {
        mean_agreement: (!taus.is_empty()).then(|| taus.iter().sum::<f64>() / taus.len() as f64),
        deltas,
        per_task,
        warning,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_cells() {
        let g = load_paper_reference().unwrap();
        assert_eq!(g.len(), 169);
        assert_eq!(g.get("LSTM", TaskKind::Length), Some(0.9979));
        assert_eq!(g.get("STV", TaskKind::MentionCount), Some(0.9894));
        assert_eq!(g.category("FastText"), ModelCategory::Supervised);
    }

    #[test]
    fn renders_percent_cell() {
        let mut g = MetricsGrid::new();
        g.insert("BOW", TaskKind::Length, 0.3783).unwrap();
        let md = render_grid(&g, GridFormat::Markdown);
        assert!(md.contains("| BOW | **37.83** | - |"));
    }

    #[test]
    fn empty_grid_is_header_only() {
        let md = render_grid(&MetricsGrid::new(), GridFormat::Markdown);
        assert_eq!(md.lines().count(), 2);
        assert_eq!(render_grid(&MetricsGrid::new(), GridFormat::Csv), "model,task,f1\n");
    }

    #[test]
    fn disjoint_grids_warn() {
        let mut a = MetricsGrid::new();
        a.insert("X", TaskKind::Length, 0.5).unwrap();
        let d = diff_grids(&a, &load_paper_reference().unwrap());
        assert!(d.deltas.is_empty());
        assert!(d.warning.is_some());
        assert_eq!(d.mean_agreement, None);
    }

    #[test]
    fn tau_examples() {
        assert_eq!(kendall_tau_b(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]), Some(1.0));
        assert_eq!(kendall_tau_b(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0]), Some(-1.0));
        assert_eq!(kendall_tau_b(&[1.0, 1.0], &[1.0, 2.0]), None);
    }
}
