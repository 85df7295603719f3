//! Python bindings: corpora, task datasets, interchange tables and
//! single-cell probe runs. Heavy calls release the GIL.

use pyo3::exceptions::{PyOSError, PyValueError};
use pyo3::prelude::*;

use tweetprobe::analysis::TrendLabel;
use tweetprobe::corpus::{generate_synthetic, load_corpus, write_jsonl, CorpusFormat, SynthConfig};
use tweetprobe::embedders::{load_external, write_external};
use tweetprobe::pipeline::{fit_embedder, run_cell, word_store, ModelChoice, PipelineConfig};
use tweetprobe::report::{kendall_tau_b, load_paper_reference, render_grid, GridFormat};

fn err(e: impl Into<tweetprobe::Error>) -> PyErr {
    match e.into() {
        tweetprobe::Error::Io(io) => PyOSError::new_err(io.to_string()),
        other => PyValueError::new_err(other.to_string()),
    }
}

fn pipeline_config(seed: u64) -> PipelineConfig {
    let mut cfg = PipelineConfig {
        seed,
        ..PipelineConfig::default()
    };
    cfg.resolve_seeds();
    cfg
}

fn task_kind(name: &str) -> PyResult<tweetprobe::TaskKind> {
    name.parse().map_err(err)
}

#[pyclass(name = "Corpus", frozen)]
pub struct PyCorpus {
    pub inner: tweetprobe::Corpus,
}

#[pymethods]
impl PyCorpus {
    /// Reads a corpus file; `format` is "jsonl" or "csv".
    #[staticmethod]
    #[pyo3(signature = (path, format = "jsonl"))]
    pub fn load(path: &str, format: &str) -> PyResult<Self> {
        let format = match format {
            "jsonl" => CorpusFormat::Jsonl,
            "csv" => CorpusFormat::Csv,
            other => return Err(PyValueError::new_err(format!("unknown corpus format {other:?}"))),
        };
        Ok(PyCorpus {
            inner: load_corpus(path, format).map_err(err)?,
        })
    }

    pub fn save(&self, path: &str) -> PyResult<()> {
        let f = std::fs::File::create(path).map_err(err)?;
        write_jsonl(&self.inner, std::io::BufWriter::new(f)).map_err(err)
    }

    pub fn ids(&self) -> Vec<String> {
        self.inner.tweets().iter().map(|t| t.id.clone()).collect()
    }

    pub fn text(&self, id: &str) -> Option<String> {
        self.inner.get(id).map(|t| t.text.clone())
    }

    pub fn fingerprint(&self) -> String {
        self.inner.fingerprint()
    }

    pub fn __len__(&self) -> usize {
        self.inner.len()
    }
}

#[pyclass(name = "TaskDataset", frozen, get_all)]
pub struct PyTaskDataset {
    pub task: String,
    pub class_count: usize,
    pub tweet_ids: Vec<String>,
    pub labels: Vec<usize>,
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
}

#[pymethods]
impl PyTaskDataset {
    pub fn __len__(&self) -> usize {
        self.labels.len()
    }
}

/// Tweet vectors keyed by id, in the interchange text format.
#[pyclass(name = "EmbeddingTable")]
pub struct PyEmbeddingTable {
    pub inner: tweetprobe::EmbeddingTable,
}

#[pymethods]
impl PyEmbeddingTable {
    #[new]
    pub fn new(name: &str, dim: usize) -> Self {
        PyEmbeddingTable {
            inner: tweetprobe::EmbeddingTable::new(name, dim),
        }
    }

    #[staticmethod]
    pub fn load(name: &str, path: &str) -> PyResult<Self> {
        Ok(PyEmbeddingTable {
            inner: load_external(name, path).map_err(err)?,
        })
    }

    pub fn insert(&mut self, id: String, vector: Vec<f64>) -> PyResult<()> {
        self.inner.insert(id, vector).map_err(err)
    }

    pub fn get(&self, id: &str) -> Option<Vec<f64>> {
        self.inner.get(id).map(<[f64]>::to_vec)
    }

    pub fn save(&self, path: &str) -> PyResult<()> {
        let f = std::fs::File::create(path).map_err(err)?;
        write_external(&self.inner, std::io::BufWriter::new(f)).map_err(err)
    }

    #[getter]
    pub fn name(&self) -> String {
        self.inner.name.clone()
    }

    #[getter]
    pub fn dim(&self) -> usize {
        self.inner.dim()
    }

    pub fn __len__(&self) -> usize {
        self.inner.len()
    }
}

#[pyclass(name = "ProbeResult", frozen, get_all)]
pub struct PyProbeResult {
    pub model: String,
    pub task: String,
    pub macro_f1: f64,
    pub micro_f1: f64,
    pub f1: Vec<f64>,
    pub confusion: Vec<Vec<u64>>,
    pub best_epoch: usize,
}

/// Synthetic annotated corpus of `n` tweets.
#[pyfunction]
#[pyo3(signature = (n, seed = 0))]
pub fn synth(py: Python<'_>, n: usize, seed: u64) -> PyResult<PyCorpus> {
    let cfg = SynthConfig {
        n_tweets: n,
        seed,
        ..SynthConfig::default()
    };
    let s = py.detach(|| generate_synthetic(&cfg)).map_err(err)?;
    Ok(PyCorpus { inner: s.corpus })
}

/// (surface, kind) pairs.
#[pyfunction]
pub fn tokenize(text: &str) -> Vec<(String, String)> {
    tweetprobe::tokenize(text)
        .into_iter()
        .map(|t| (t.surface, format!("{:?}", t.kind).to_lowercase()))
        .collect()
}

#[pyfunction]
pub fn task_names() -> Vec<String> {
    tweetprobe::TaskKind::ALL.iter().map(|k| k.name().to_string()).collect()
}

#[pyfunction]
#[pyo3(signature = (corpus, task, seed = 0))]
pub fn build_task(py: Python<'_>, corpus: &PyCorpus, task: &str, seed: u64) -> PyResult<PyTaskDataset> {
    let kind = task_kind(task)?;
    let cfg = pipeline_config(seed);
    let ds = py
        .detach(|| tweetprobe::build_task(kind, &corpus.inner, &cfg.tasks, cfg.seed))
        .map_err(err)?;
    Ok(PyTaskDataset {
        task: kind.name().to_string(),
        class_count: ds.class_count,
        tweet_ids: ds.instances.iter().map(|i| i.tweet_id.clone()).collect(),
        labels: ds.labels(),
        train: ds.splits.train,
        val: ds.splits.val,
        test: ds.splits.test,
    })
}

/// Dense vectors from a native model (lda, bom, random, length_oracle).
#[pyfunction]
#[pyo3(signature = (corpus, model, seed = 0))]
pub fn embed(py: Python<'_>, corpus: &PyCorpus, model: &str, seed: u64) -> PyResult<PyEmbeddingTable> {
    let choice = ModelChoice::native(model).ok_or_else(|| PyValueError::new_err(format!("unknown model {model:?}")))?;
    if matches!(choice, ModelChoice::Bow | ModelChoice::FastText) {
        return Err(PyValueError::new_err(format!("{} has no dense tweet vectors", choice.name())));
    }
    let cfg = pipeline_config(seed);
    let table = py.detach(|| -> tweetprobe::Result<_> {
        let words = word_store(None, &cfg)?;
        let emb = fit_embedder(&choice, &corpus.inner, &words, &cfg, None)?;
        let mut table = tweetprobe::EmbeddingTable::new(choice.name(), emb.dim());
        for t in corpus.inner.tweets() {
            table.insert(t.id.clone(), emb.embed_tweet(t)?.to_dense(emb.dim()))?;
        }
        Ok(table)
    });
    Ok(PyEmbeddingTable {
        inner: table.map_err(err)?,
    })
}

/// Trains and scores one (model, task) cell. `model` is a native model
/// name, or ignored when `table` supplies external vectors.
#[pyfunction]
#[pyo3(signature = (corpus, task, model = "bow", seed = 0, table = None))]
pub fn probe(
    py: Python<'_>,
    corpus: &PyCorpus,
    task: &str,
    model: &str,
    seed: u64,
    table: Option<PyRef<'_, PyEmbeddingTable>>,
) -> PyResult<PyProbeResult> {
    let kind = task_kind(task)?;
    let choice = match table {
        Some(t) => ModelChoice::External(t.inner.clone()),
        None => ModelChoice::native(model).ok_or_else(|| PyValueError::new_err(format!("unknown model {model:?}")))?,
    };
    let cfg = pipeline_config(seed);
    let run = py
        .detach(|| -> tweetprobe::Result<_> {
            let words = word_store(None, &cfg)?;
            run_cell(&corpus.inner, kind, &choice, &words, &cfg, None)
        })
        .map_err(err)?;
    Ok(PyProbeResult {
        model: run.model_name,
        task: kind.name().to_string(),
        macro_f1: run.metrics.macro_f1,
        micro_f1: run.metrics.micro_f1,
        f1: run.metrics.f1,
        confusion: run.metrics.confusion,
        best_epoch: run.best_epoch,
    })
}

/// "positively_correlated", "negatively_correlated", "uncorrelated" or "invariant".
#[pyfunction]
pub fn classify_trend(values: Vec<f64>) -> PyResult<&'static str> {
    Ok(match tweetprobe::classify_trend(&values).map_err(err)? {
        TrendLabel::PositivelyCorrelated => "positively_correlated",
        TrendLabel::NegativelyCorrelated => "negatively_correlated",
        TrendLabel::Uncorrelated => "uncorrelated",
        TrendLabel::Invariant => "invariant",
    })
}

#[pyfunction]
pub fn kendall_tau(x: Vec<f64>, y: Vec<f64>) -> PyResult<Option<f64>> {
    if x.len() != y.len() {
        return Err(PyValueError::new_err("x and y differ in length"));
    }
    Ok(kendall_tau_b(&x, &y))
}

/// The bundled reference score table as markdown or csv.
#[pyfunction]
#[pyo3(signature = (format = "markdown"))]
pub fn reference_grid(format: &str) -> PyResult<String> {
    let format = match format {
        "markdown" => GridFormat::Markdown,
        "csv" => GridFormat::Csv,
        other => return Err(PyValueError::new_err(format!("unknown grid format {other:?}"))),
    };
    Ok(render_grid(&load_paper_reference().map_err(err)?, format))
}

#[pymodule]
#[pyo3(name = "tweetprobe")]
fn init(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyCorpus>()?;
    m.add_class::<PyTaskDataset>()?;
    m.add_class::<PyEmbeddingTable>()?;
    m.add_class::<PyProbeResult>()?;
    m.add_function(wrap_pyfunction!(synth, m)?)?;
    m.add_function(wrap_pyfunction!(tokenize, m)?)?;
    m.add_function(wrap_pyfunction!(task_names, m)?)?;
    m.add_function(wrap_pyfunction!(build_task, m)?)?;
    m.add_function(wrap_pyfunction!(embed, m)?)?;
    m.add_function(wrap_pyfunction!(probe, m)?)?;
    m.add_function(wrap_pyfunction!(classify_trend, m)?)?;
    m.add_function(wrap_pyfunction!(kendall_tau, m)?)?;
    m.add_function(wrap_pyfunction!(reference_grid, m)?)?;
    Ok(())
}
