//! End-to-end runs of one (model, task) cell, shared by the command line,
//! the Python bindings and the tests.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::analysis::{SliceConfig, TrendConfig, DEFAULT_SIZES};
use crate::corpus::{Corpus, SynthConfig};
use crate::embedders::{
    fit_bow, fit_lda, length_oracle_table, BomEmbedder, BowVocab, EmbedError, EmbeddingTable, LdaConfig, LdaModel,
    RandomEmbedder, TweetEmbedder, WordVecStore, DEFAULT_BOW_K, DEFAULT_BOW_MAX_N,
};
use crate::fasttext::{evaluate_ft, train_ft, FtConfig, FtModel};
use crate::hashing::{config_hash, derive_seed};
use crate::probe::{assemble_features, train, AuxSource, EpochRecord, FeatureSpec, Metrics, ProbeModel, TrainConfig};
use crate::taskgen::{build_task, TaskConfig, TaskDataset, TaskKind};
use crate::Result;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BowConfig {
    pub k: usize,
    pub max_n: usize,
}

impl Default for BowConfig {
    fn default() -> Self {
        BowConfig {
            k: DEFAULT_BOW_K,
            max_n: DEFAULT_BOW_MAX_N,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SweepConfig {
    pub sizes: Vec<usize>,
    pub slice: SliceConfig,
    pub trend: TrendConfig,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            sizes: DEFAULT_SIZES.to_vec(),
            slice: SliceConfig::default(),
            trend: TrendConfig::default(),
        }
    }
}

/// Everything a run depends on besides its input files. Serialized as the
/// JSON config file; `seed` overrides every component seed when resolved.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub seed: u64,
    pub synth: SynthConfig,
    pub tasks: TaskConfig,
    pub bow: BowConfig,
    pub lda: LdaConfig,
    pub probe: TrainConfig,
    pub fasttext: FtConfig,
    pub aux_match: bool,
    /// Dimension of the random control and of the word store used when no
    /// word vectors are supplied.
    pub random_dim: usize,
    pub word_dim: usize,
    pub sweep: SweepConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            seed: 0,
            synth: SynthConfig::default(),
            tasks: TaskConfig::default(),
            bow: BowConfig::default(),
            lda: LdaConfig::default(),
            probe: TrainConfig::default(),
            fasttext: FtConfig::default(),
            aux_match: true,
            random_dim: 50,
            word_dim: 50,
            sweep: SweepConfig::default(),
        }
    }
}

impl PipelineConfig {
    /// Copies the top-level seed into every component.
    pub fn resolve_seeds(&mut self) {
        self.synth.seed = self.seed;
        self.lda.seed = self.seed;
        self.probe.seed = self.seed;
        self.fasttext.train.seed = self.seed;
    }

    pub fn validate(&self) -> Result<()> {
        self.synth.validate()?;
        self.tasks.validate()?;
        self.probe.validate()?;
        self.fasttext.validate()?;
        if self.bow.k == 0 || self.bow.max_n == 0 || self.random_dim == 0 || self.word_dim == 0 {
            return Err(EmbedError::InvalidParameter("bow.k, bow.max_n, random_dim and word_dim must be positive".into()).into());
        }
        if self.sweep.sizes.is_empty() || self.sweep.sizes.contains(&0) {
            return Err(EmbedError::InvalidParameter("sweep sizes must be positive".into()).into());
        }
        Ok(())
    }

    pub fn hash(&self) -> String {
        config_hash(self)
    }
}

/// Which representation a cell probes.
#[derive(Debug, Clone)]
pub enum ModelChoice {
    Bow,
    Lda,
    Bom,
    Random,
    LengthOracle,
    FastText,
    External(EmbeddingTable),
}

impl ModelChoice {
    pub fn name(&self) -> &str {
        match self {
            ModelChoice::Bow => "BOW",
            ModelChoice::Lda => "LDA",
            ModelChoice::Bom => "BOM",
            ModelChoice::Random => "Random",
            ModelChoice::LengthOracle => "LengthOracle",
            ModelChoice::FastText => "FastText",
            ModelChoice::External(t) => &t.name,
        }
    }

    /// Parses a native model name (case-insensitive).
    pub fn native(name: &str) -> Option<ModelChoice> {
        Some(match name.to_ascii_lowercase().replace('-', "_").as_str() {
            "bow" => ModelChoice::Bow,
            "lda" => ModelChoice::Lda,
            "bom" => ModelChoice::Bom,
            "random" => ModelChoice::Random,
            "length_oracle" | "lengthoracle" => ModelChoice::LengthOracle,
            "fasttext" | "ft" => ModelChoice::FastText,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone)]
pub enum TrainedModel {
    Probe(ProbeModel),
    FastText(FtModel),
}

impl TrainedModel {
    pub fn write<W: std::io::Write>(&self, out: W) -> std::io::Result<()> {
        match self {
            TrainedModel::Probe(m) => m.write(out),
            TrainedModel::FastText(m) => m.write(out),
        }
    }
}

#[derive(Debug, Clone)]
pub struct CellRun {
    pub model_name: String,
    pub dataset: TaskDataset,
    pub trained: TrainedModel,
    pub history: Vec<EpochRecord>,
    pub best_epoch: usize,
    /// Test-split metrics with instance records.
    pub metrics: Metrics,
}

fn cache_path(dir: &Path, what: &str, corpus: &Corpus, cfg_hash: &str) -> PathBuf {
    dir.join(format!("{what}-{}-{cfg_hash}.json", corpus.fingerprint()))
}

fn cached<T, F>(cache: Option<&Path>, what: &str, corpus: &Corpus, cfg_hash: &str, fit: F) -> Result<T>
where
    T: Serialize + for<'de> Deserialize<'de>,
    F: FnOnce() -> Result<T>,
{
    let Some(dir) = cache else { return fit() };
    let path = cache_path(dir, what, corpus, cfg_hash);
    if let Ok(text) = fs::read_to_string(&path) {
        if let Ok(v) = serde_json::from_str(&text) {
            log::info!("loaded {what} from {}", path.display());
            return Ok(v);
        }
        log::warn!("ignoring unreadable cache entry {}", path.display());
    }
    let v = fit()?;
    fs::create_dir_all(dir)?;
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, serde_json::to_vec(&v)?)?;
    fs::rename(&tmp, &path)?;
    Ok(v)
}

pub fn fit_bow_cached(corpus: &Corpus, cfg: &BowConfig, cache: Option<&Path>) -> Result<BowVocab> {
    let mut v: BowVocab = cached(cache, "bow", corpus, &config_hash(cfg), || {
        Ok(fit_bow(corpus, cfg.k, cfg.max_n)?)
    })?;
    v.rebuild_index();
    Ok(v)
}

pub fn fit_lda_cached(corpus: &Corpus, cfg: &LdaConfig, cache: Option<&Path>) -> Result<LdaModel> {
    let mut m: LdaModel = cached(cache, "lda", corpus, &config_hash(cfg), || Ok(fit_lda(corpus, cfg)?))?;
    m.rebuild_index();
    Ok(m)
}

/// A fitted tweet embedder for a non-FastText model choice.
pub fn fit_embedder<'a>(
    model: &'a ModelChoice,
    corpus: &Corpus,
    words: &'a WordVecStore,
    cfg: &PipelineConfig,
    cache: Option<&Path>,
) -> Result<Box<dyn TweetEmbedder + 'a>> {
    Ok(match model {
        ModelChoice::Bow => Box::new(fit_bow_cached(corpus, &cfg.bow, cache)?),
        ModelChoice::Lda => Box::new(fit_lda_cached(corpus, &cfg.lda, cache)?),
        ModelChoice::Bom => Box::new(BomEmbedder { store: words }),
        ModelChoice::Random => Box::new(RandomEmbedder::new(cfg.random_dim, derive_seed(cfg.seed, "random"))),
        ModelChoice::LengthOracle => Box::new(length_oracle_table(corpus)),
        ModelChoice::External(t) => Box::new(t.clone()),
        ModelChoice::FastText => {
            return Err(EmbedError::InvalidParameter("FastText has no frozen tweet embedding".into()).into())
        }
    })
}

/// Trains a probe on the dataset's train split and scores the test split.
pub fn probe_dataset(
    dataset: &TaskDataset,
    corpus: &Corpus,
    embedder: &dyn TweetEmbedder,
    aux: AuxSource<'_>,
    spec: FeatureSpec,
    train_cfg: &TrainConfig,
) -> Result<(ProbeModel, Vec<EpochRecord>, usize, Metrics)> {
    let f = assemble_features(dataset, corpus, embedder, aux, spec)?;
    let out = train(&f.matrix, &f.labels, &dataset.splits, dataset.class_count, train_cfg)?;
    let metrics = out
        .model
        .evaluate(&f.matrix, &f.labels, &f.ids, Some(&dataset.splits.test))?;
    Ok((out.model, out.history, out.best_epoch, metrics))
}

/// Trains and evaluates `model` on an already built dataset.
pub fn run_on_dataset(
    dataset: TaskDataset,
    corpus: &Corpus,
    model: &ModelChoice,
    words: &WordVecStore,
    cfg: &PipelineConfig,
    cache: Option<&Path>,
) -> Result<CellRun> {
    if let ModelChoice::FastText = model {
        let out = train_ft(&dataset, corpus, &cfg.fasttext)?;
        let metrics = evaluate_ft(&out.model, &dataset, corpus, Some(&dataset.splits.test))?;
        return Ok(CellRun {
            model_name: model.name().to_string(),
            dataset,
            trained: TrainedModel::FastText(out.model),
            history: out.history,
            best_epoch: out.best_epoch,
            metrics,
        });
    }
    let embedder = fit_embedder(model, corpus, words, cfg, cache)?;
    let aux = match model {
        ModelChoice::Random => AuxSource::Random {
            dim: cfg.random_dim,
            seed: derive_seed(cfg.seed, "random:aux"),
        },
        _ => AuxSource::Words(words),
    };
    let spec = FeatureSpec {
        aux_match: cfg.aux_match,
    };
    let (m, history, best_epoch, metrics) =
        probe_dataset(&dataset, corpus, embedder.as_ref(), aux, spec, &cfg.probe)?;
    Ok(CellRun {
        model_name: model.name().to_string(),
        dataset,
        trained: TrainedModel::Probe(m),
        history,
        best_epoch,
        metrics,
    })
}

/// Builds the task dataset from the corpus, then trains and evaluates.
pub fn run_cell(
    corpus: &Corpus,
    task: TaskKind,
    model: &ModelChoice,
    words: &WordVecStore,
    cfg: &PipelineConfig,
    cache: Option<&Path>,
) -> Result<CellRun> {
    let dataset = build_task(task, corpus, &cfg.tasks, cfg.seed)?;
    run_on_dataset(dataset, corpus, model, words, cfg, cache)
}

/// Word store from a file, or an empty store of `cfg.word_dim` whose
/// lookups all fall back to hashed unit vectors.
pub fn word_store(path: Option<&Path>, cfg: &PipelineConfig) -> Result<WordVecStore> {
    match path {
        Some(p) => Ok(crate::embedders::load_word_vectors(p)?),
        None => Ok(WordVecStore::empty(cfg.word_dim)),
    }
}

