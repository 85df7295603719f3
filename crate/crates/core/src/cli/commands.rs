use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::Parser;
use serde_json::json;

use super::manifest::{file_sha, hash_outputs, manifest_path, Manifest};
use super::{Cli, Command, Common, Failure, SweepKind, CACHE_ENV};
use crate::analysis::{bin_scores, classify_trend_with, size_sweep, slice_by_length, write_length_csv, write_size_csv, AnalysisError};
use crate::corpus::{generate_synthetic, load_corpus, write_jsonl, Corpus, CorpusFormat};
use crate::embedders::{load_external, load_word_vectors, EmbeddingTable, WordVecStore};
use crate::pipeline::{fit_embedder, run_on_dataset, word_store, CellRun, ModelChoice, PipelineConfig};
use crate::report::{diff_grids, load_paper_reference, parse_grid_csv, render_grid, GridFormat, REFERENCE_NOTE};
use crate::taskgen::{build_task, write_dataset, DatasetMeta, TaskError, TaskKind};
use crate::analysis::MetricsGrid;

type CmdResult<T = ()> = Result<T, Failure>;

/// Per-run bookkeeping for the manifest.
struct Run {
    command: &'static str,
    inputs: BTreeMap<String, String>,
}

impl Run {
    fn new(command: &'static str) -> Self {
        Run {
            command,
            inputs: BTreeMap::new(),
        }
    }

    fn input(&mut self, path: &Path) -> CmdResult {
        let sha = file_sha(path).map_err(|e| Failure::Validation(format!("{}: {e}", path.display())))?;
        self.inputs.insert(path.display().to_string(), sha);
        Ok(())
    }
}

fn load_config(common: &Common, preset: Option<PipelineConfig>, run: &mut Run) -> CmdResult<PipelineConfig> {
    let mut cfg = match (preset, &common.config) {
        (Some(c), _) => c,
        (None, Some(path)) => {
            run.input(path)?;
            let text = fs::read_to_string(path)
                .map_err(|e| Failure::Validation(format!("config {}: {e}", path.display())))?;
            serde_json::from_str(&text)
                .map_err(|e| Failure::Validation(format!("config {}: {e}", path.display())))?
        }
        (None, None) => PipelineConfig::default(),
    };
    if let Some(s) = common.seed {
        cfg.seed = s;
    }
    cfg.resolve_seeds();
    Ok(cfg)
}

fn require_out(common: &Common) -> CmdResult<PathBuf> {
    common
        .out
        .clone()
        .ok_or_else(|| Failure::Validation("--out is required".into()))
}

fn parse_task(name: &str) -> CmdResult<TaskKind> {
    name.parse::<TaskKind>()
        .map_err(|_| Failure::Validation(format!("unknown task {name:?}")))
}

fn read_corpus(path: &Path, run: &mut Run) -> CmdResult<Corpus> {
    run.input(path)?;
    Ok(load_corpus(path, CorpusFormat::Jsonl)?)
}

fn cache_dir() -> Option<PathBuf> {
    std::env::var_os(CACHE_ENV).map(PathBuf::from)
}

fn create_file(path: &Path) -> CmdResult<BufWriter<File>> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent)?;
    }
    Ok(BufWriter::new(File::create(path)?))
}

fn write_json(path: &Path, value: &impl serde::Serialize) -> CmdResult {
    let mut w = create_file(path)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

fn finish(run: Run, argv: Vec<String>, cfg: &PipelineConfig, out: &Path) -> CmdResult {
    let seeds = BTreeMap::from([
        ("seed".to_string(), cfg.seed),
        ("synth".to_string(), cfg.synth.seed),
        ("lda".to_string(), cfg.lda.seed),
        ("probe".to_string(), cfg.probe.seed),
        ("fasttext".to_string(), cfg.fasttext.train.seed),
    ]);
    let m = Manifest {
        tool: "tweetprobe".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        command: run.command.into(),
        argv,
        config: cfg.clone(),
        config_hash: cfg.hash(),
        seeds,
        inputs: run.inputs,
        outputs: hash_outputs(out)?,
    };
    m.write(out)?;
    Ok(())
}

/// Runs a parsed command. `preset` replaces the config-file lookup (used
/// by replay, which carries the resolved config in the manifest).
pub(super) fn execute(cli: Cli, argv: Vec<String>, preset: Option<PipelineConfig>) -> CmdResult {
    match cli.command {
        Command::Synth { n, common } => {
            let mut run = Run::new("synth");
            let mut cfg = load_config(&common, preset, &mut run)?;
            if let Some(n) = n {
                cfg.synth.n_tweets = n;
            }
            cfg.validate()?;
            let out = require_out(&common)?;
            let s = generate_synthetic(&cfg.synth)?;
            let mut w = create_file(&out)?;
            write_jsonl(&s.corpus, &mut w)?;
            w.flush()?;
            eprintln!("wrote {} tweets to {}", s.corpus.len(), out.display());
            finish(run, argv, &cfg, &out)
        }
        Command::Ingest { corpus, format, common } => {
            let mut run = Run::new("ingest");
            let cfg = load_config(&common, preset, &mut run)?;
            cfg.validate()?;
            let out = require_out(&common)?;
            run.input(&corpus)?;
            let c = load_corpus(&corpus, format)?;
            let mut w = create_file(&out)?;
            write_jsonl(&c, &mut w)?;
            w.flush()?;
            eprintln!("validated {} tweets", c.len());
            finish(run, argv, &cfg, &out)
        }
        Command::Tasks { corpus, task, common } => {
            let mut run = Run::new("tasks");
            let cfg = load_config(&common, preset, &mut run)?;
            cfg.validate()?;
            let out = require_out(&common)?;
            let c = read_corpus(&corpus, &mut run)?;
            let selected: Vec<TaskKind> = task.iter().map(|t| parse_task(t)).collect::<CmdResult<_>>()?;
            let all = selected.is_empty();
            let kinds = if all { TaskKind::ALL.to_vec() } else { selected };
            fs::create_dir_all(&out)?;
            for kind in kinds {
                let ds = match build_task(kind, &c, &cfg.tasks, cfg.seed) {
                    Ok(ds) => ds,
                    Err(TaskError::NoInstances(k)) if all => {
                        log::warn!("skipping {k}: no instances on this corpus");
                        continue;
                    }
                    Err(e) => return Err(e.into()),
                };
                let mut w = create_file(&out.join(format!("{}.jsonl", kind.name())))?;
                let meta: DatasetMeta = write_dataset(&ds, &mut w)?;
                w.flush()?;
                write_json(&out.join(format!("{}.meta.json", kind.name())), &meta)?;
                eprintln!("{}: {} instances, {} classes", kind.name(), ds.instances.len(), ds.class_count);
            }
            finish(run, argv, &cfg, &out)
        }
        Command::Embed {
            corpus,
            model,
            word_vectors,
            common,
        } => {
            let mut run = Run::new("embed");
            let cfg = load_config(&common, preset, &mut run)?;
            cfg.validate()?;
            let out = require_out(&common)?;
            let c = read_corpus(&corpus, &mut run)?;
            let choice = ModelChoice::native(&model)
                .ok_or_else(|| Failure::Validation(format!("unknown model {model:?}")))?;
            if matches!(choice, ModelChoice::Bow | ModelChoice::FastText) {
                return Err(Failure::Validation(format!(
                    "{} has no dense tweet vectors to export; probe it directly",
                    choice.name()
                )));
            }
            if let Some(p) = &word_vectors {
                run.input(p)?;
            }
            let words = word_store(word_vectors.as_deref(), &cfg)?;
            let emb = fit_embedder(&choice, &c, &words, &cfg, cache_dir().as_deref())?;
            let mut table = EmbeddingTable::new(choice.name(), emb.dim());
            for t in c.tweets() {
                table.insert(t.id.clone(), emb.embed_tweet(t)?.to_dense(emb.dim()))?;
            }
            let mut w = create_file(&out)?;
            crate::embedders::write_external(&table, &mut w)?;
            w.flush()?;
            finish(run, argv, &cfg, &out)
        }
        Command::Probe {
            corpus,
            task,
            model,
            word_vectors,
            external_embeddings,
            common,
        } => {
            let mut run = Run::new("probe");
            let cfg = load_config(&common, preset, &mut run)?;
            cfg.validate()?;
            let out = require_out(&common)?;
            let c = read_corpus(&corpus, &mut run)?;
            let kind = parse_task(&task)?;
            let choice = model_choice(&model, external_embeddings.as_deref(), &mut run)?;
            if let Some(p) = &word_vectors {
                run.input(p)?;
            }
            let words = word_store(word_vectors.as_deref(), &cfg)?;
            let ds = build_task(kind, &c, &cfg.tasks, cfg.seed)?;
            let cell = run_on_dataset(ds, &c, &choice, &words, &cfg, cache_dir().as_deref())?;
            write_cell(&out, &cell)?;
            println!(
                "{} {}: macro-F1 {:.4} on {} test instances",
                cell.model_name,
                kind.name(),
                cell.metrics.macro_f1,
                cell.metrics.instances.len()
            );
            finish(run, argv, &cfg, &out)
        }
        Command::Sweep {
            corpus,
            task,
            model,
            word_vectors,
            external_embeddings,
            kind,
            common,
        } => {
            let mut run = Run::new("sweep");
            let cfg = load_config(&common, preset, &mut run)?;
            cfg.validate()?;
            let out = require_out(&common)?;
            let c = read_corpus(&corpus, &mut run)?;
            let task_kind = parse_task(&task)?;
            let ds = build_task(task_kind, &c, &cfg.tasks, cfg.seed)?;
            fs::create_dir_all(&out)?;
            let mut summary = serde_json::Map::new();
            let cache = cache_dir();
            if matches!(kind, SweepKind::Size | SweepKind::Both) {
                let base = ModelChoice::native(&model);
                let name = base.as_ref().map_or(model.clone(), |b| b.name().to_string());
                if matches!(base, Some(ModelChoice::Bow | ModelChoice::LengthOracle)) {
                    return Err(Failure::Validation(format!("{name} has no size parameter")));
                }
                if base.is_none() && external_embeddings.is_none() {
                    return Err(Failure::Validation(format!(
                        "unknown model {model:?}; pass --external-embeddings with a {{size}} placeholder"
                    )));
                }
                for size in &cfg.sweep.sizes {
                    for p in [&word_vectors, &external_embeddings].into_iter().flatten() {
                        let p = sized(p, *size);
                        if p.exists() {
                            run.input(&p)?;
                        }
                    }
                }
                let jobs = common.jobs.unwrap_or(1);
                let points = size_sweep(&cfg.sweep.sizes, jobs, |size| -> CmdResult<_> {
                    let mut cfg = cfg.clone();
                    let choice = match &base {
                        Some(ModelChoice::FastText) => {
                            cfg.fasttext.dim = size;
                            ModelChoice::FastText
                        }
                        Some(ModelChoice::Lda) => {
                            cfg.lda.topics = size;
                            cfg.lda.alpha = None;
                            ModelChoice::Lda
                        }
                        Some(ModelChoice::Random) => {
                            cfg.random_dim = size;
                            ModelChoice::Random
                        }
                        Some(other) => other.clone(),
                        None => {
                            let p = sized(external_embeddings.as_ref().expect("checked above"), size);
                            if !p.exists() {
                                return Err(AnalysisError::MissingSizeVariant(size).into());
                            }
                            ModelChoice::External(load_external(&model, &p)?)
                        }
                    };
                    let bom = matches!(choice, ModelChoice::Bom);
                    let words = sized_words(word_vectors.as_deref(), size, bom, &cfg)?;
                    let cell = run_on_dataset(ds.clone(), &c, &choice, &words, &cfg, cache.as_deref())?;
                    write_json(&out.join("size").join(size.to_string()).join("metrics.json"), &metrics_json(&cell))?;
                    Ok(cell.metrics)
                })?;
                let mut w = create_file(&out.join("size.csv"))?;
                write_size_csv(&mut w, &name, task_kind, &points).map_err(csv_err)?;
                w.flush()?;
                let values: Vec<f64> = points.iter().map(|p| p.macro_f1).collect();
                let trend = classify_trend_with(&values, &cfg.sweep.trend).ok();
                for p in &points {
                    println!("{name} {} size {}: macro-F1 {:.4}", task_kind.name(), p.size, p.macro_f1);
                }
                println!("size trend: {}", trend.map_or("n/a".into(), |t| format!("{t:?}")));
                summary.insert("size".into(), json!({ "model": name, "points": points, "trend": trend }));
            }
            if matches!(kind, SweepKind::Length | SweepKind::Both) {
                let choice = model_choice(&model, external_embeddings.as_deref(), &mut run)?;
                let words = word_store(word_vectors.as_deref(), &cfg)?;
                let cell = run_on_dataset(ds.clone(), &c, &choice, &words, &cfg, cache.as_deref())?;
                let bins = slice_by_length(&cell.metrics, &c, cfg.sweep.slice)?;
                let mut w = create_file(&out.join("length.csv"))?;
                write_length_csv(&mut w, &cell.model_name, task_kind, &bins).map_err(csv_err)?;
                w.flush()?;
                let trend = classify_trend_with(&bin_scores(&bins), &cfg.sweep.trend).ok();
                println!("length trend: {}", trend.map_or("n/a".into(), |t| format!("{t:?}")));
                summary.insert(
                    "length".into(),
                    json!({ "model": cell.model_name, "bins": bins, "trend": trend }),
                );
            }
            write_json(&out.join("sweep.json"), &summary)?;
            finish(run, argv, &cfg, &out)
        }
        Command::Report {
            grid,
            diff,
            format,
            common,
        } => {
            let mut run = Run::new("report");
            let cfg = load_config(&common, preset, &mut run)?;
            let reference = load_paper_reference()?;
            let merged = if grid.is_empty() {
                reference.clone()
            } else {
                let mut merged = MetricsGrid::new();
                for p in &grid {
                    run.input(p)?;
                    let g = parse_grid_csv(&fs::read_to_string(p)?)?;
                    for (m, t, f) in g.iter() {
                        merged.insert(m, t, f)?;
                    }
                }
                merged
            };
            let mut text = String::new();
            match format {
                GridFormat::Csv => {
                    if diff {
                        return Err(Failure::Validation("--diff needs --format markdown".into()));
                    }
                    text.push_str(&render_grid(&merged, GridFormat::Csv));
                }
                GridFormat::Markdown => {
                    text.push_str("Scores are macro-F1 (%); bold marks the best model per task.\n\n");
                    if grid.is_empty() {
                        let _ = writeln!(text, "{REFERENCE_NOTE}\n");
                    }
                    text.push_str(&render_grid(&merged, GridFormat::Markdown));
                    if diff {
                        text.push_str(&render_diff(&merged, &reference));
                    }
                }
            }
            match &common.out {
                Some(out) => {
                    let mut w = create_file(out)?;
                    w.write_all(text.as_bytes())?;
                    w.flush()?;
                    finish(run, argv, &cfg, out)
                }
                None => {
                    print!("{text}");
                    Ok(())
                }
            }
        }
        Command::Replay { manifest, out } => replay(&manifest, out),
    }
}

fn csv_err(e: csv::Error) -> Failure {
    Failure::Runtime(e.to_string())
}

fn sized(pattern: &Path, size: usize) -> PathBuf {
    PathBuf::from(pattern.to_string_lossy().replace("{size}", &size.to_string()))
}

/// Word store for one size. Only BOM takes its dimension from the size;
/// other models keep `word_dim` for their aux inputs.
fn sized_words(pattern: Option<&Path>, size: usize, bom: bool, cfg: &PipelineConfig) -> CmdResult<WordVecStore> {
    match pattern {
        Some(p) if p.to_string_lossy().contains("{size}") => {
            let p = sized(p, size);
            if !p.exists() {
                return Err(AnalysisError::MissingSizeVariant(size).into());
            }
            Ok(load_word_vectors(&p)?)
        }
        Some(p) => Ok(load_word_vectors(p)?),
        None => Ok(WordVecStore::empty(if bom { size } else { cfg.word_dim })),
    }
}

fn model_choice(model: &str, external: Option<&Path>, run: &mut Run) -> CmdResult<ModelChoice> {
    match external {
        Some(p) => {
            run.input(p)?;
            Ok(ModelChoice::External(load_external(model, p)?))
        }
        None => ModelChoice::native(model).ok_or_else(|| {
            Failure::Validation(format!(
                "unknown model {model:?}; native models are bow, lda, bom, random, length_oracle, fasttext"
            ))
        }),
    }
}

fn metrics_json(cell: &CellRun) -> serde_json::Value {
    json!({
        "model": cell.model_name,
        "task": cell.dataset.kind,
        "macro_f1": cell.metrics.macro_f1,
        "micro_f1": cell.metrics.micro_f1,
        "best_epoch": cell.best_epoch,
        "metrics": cell.metrics,
    })
}

fn write_cell(out: &Path, cell: &CellRun) -> CmdResult {
    fs::create_dir_all(out)?;
    let mut w = create_file(&out.join("dataset.jsonl"))?;
    let meta = write_dataset(&cell.dataset, &mut w)?;
    w.flush()?;
    write_json(&out.join("dataset.meta.json"), &meta)?;
    let mut w = create_file(&out.join("model.txt"))?;
    cell.trained.write(&mut w)?;
    w.flush()?;
    write_json(&out.join("metrics.json"), &metrics_json(cell))?;
    let mut w = create_file(&out.join("metrics.csv"))?;
    cell.metrics.write_csv(&mut w).map_err(csv_err)?;
    w.flush()?;
    write_json(&out.join("history.json"), &cell.history)?;
    let mut g = MetricsGrid::new();
    g.insert(&cell.model_name, cell.dataset.kind, cell.metrics.macro_f1)?;
    fs::write(out.join("cell.csv"), render_grid(&g, GridFormat::Csv))?;
    Ok(())
}

fn render_diff(ours: &MetricsGrid, reference: &MetricsGrid) -> String {
    let d = diff_grids(ours, reference);
    let mut s = format!("\n## Comparison with reference\n\n{REFERENCE_NOTE}\n\n");
    if let Some(w) = &d.warning {
        let _ = writeln!(s, "Warning: {w}\n");
    }
    if !d.deltas.is_empty() {
        s.push_str("| Model | Task | Ours | Reference | Delta |\n|---|---|---:|---:|---:|\n");
        for c in &d.deltas {
            let _ = writeln!(
                s,
                "| {} | {} | {:.2} | {:.2} | {:+.2} |",
                c.model,
                c.task.title(),
                c.ours * 100.0,
                c.reference * 100.0,
                c.delta * 100.0
            );
        }
        s.push_str("\n| Task | Models | Kendall tau |\n|---|---:|---:|\n");
        for t in &d.per_task {
            let tau = t.kendall_tau.map_or("-".to_string(), |v| format!("{v:.3}"));
            let _ = writeln!(s, "| {} | {} | {tau} |", t.task.title(), t.models);
        }
        if let Some(m) = d.mean_agreement {
            let _ = writeln!(s, "\nMean rank agreement: {m:.3}");
        }
    }
    s
}

fn replace_out(argv: &[String], new_out: &Path) -> Vec<String> {
    let new = new_out.display().to_string();
    let mut out = Vec::with_capacity(argv.len() + 2);
    let mut it = argv.iter();
    let mut replaced = false;
    while let Some(a) = it.next() {
        if a == "--out" {
            it.next();
            out.push(a.clone());
            out.push(new.clone());
            replaced = true;
        } else if a.starts_with("--out=") {
            out.push(format!("--out={new}"));
            replaced = true;
        } else {
            out.push(a.clone());
        }
    }
    if !replaced {
        out.push("--out".into());
        out.push(new);
    }
    out
}

fn replay(manifest: &Path, out: Option<PathBuf>) -> CmdResult {
    let m = Manifest::read(manifest).map_err(|e| Failure::Validation(format!("{}: {e}", manifest.display())))?;
    for (path, sha) in &m.inputs {
        let now = file_sha(Path::new(path)).map_err(|e| Failure::Validation(format!("input {path}: {e}")))?;
        if &now != sha {
            return Err(Failure::Validation(format!("input {path} changed since the manifest was written")));
        }
    }
    let argv = match &out {
        Some(o) => replace_out(&m.argv, o),
        None => m.argv.clone(),
    };
    let cli = Cli::try_parse_from(std::iter::once("tweetprobe".to_string()).chain(argv.iter().cloned()))
        .map_err(|e| Failure::Validation(format!("manifest arguments: {e}")))?;
    let target = match &cli.command {
        Command::Synth { common, .. }
        | Command::Ingest { common, .. }
        | Command::Tasks { common, .. }
        | Command::Embed { common, .. }
        | Command::Probe { common, .. }
        | Command::Sweep { common, .. }
        | Command::Report { common, .. } => require_out(common)?,
        Command::Replay { .. } => return Err(Failure::Validation("cannot replay a replay".into())),
    };
    execute(cli, argv, Some(m.config.clone()))?;
    let now = Manifest::read(&manifest_path(&target))?;
    let same = if target.is_file() {
        now.outputs.values().eq(m.outputs.values())
    } else {
        now.outputs == m.outputs
    };
    if same {
        println!("replay identical: {} output file(s) match", now.outputs.len());
        Ok(())
    } else {
        let mut diff = Vec::new();
        for (k, v) in &m.outputs {
            if now.outputs.get(k) != Some(v) {
                diff.push(k.clone());
            }
        }
        for k in now.outputs.keys() {
            if !m.outputs.contains_key(k) {
                diff.push(k.clone());
            }
        }
        Err(Failure::Runtime(format!("replay differs in: {}", diff.join(", "))))
    }
}
