//! End-to-end commands behind the `embmte` binary.
//!
//! Every command takes plain config structs and writes its artifacts into an
//! output directory, so the same runs can be scripted from Rust.

use std::collections::HashMap;
use std::path::{Path, PathBuf};

use serde::Deserialize;
use thiserror::Error;

use crate::analysis::{self, AnalysisConfig, AnalysisError, AnalysisReport, Vocabulary};
use crate::corpus::{self, CorpusError, DACorpus, LanguagePair};
use crate::embedding_store::{
    combine_sources, load_embeddings, EmbeddingError, EmbeddingKey, EmbeddingStore,
};
use crate::eval::{self, EvalError, MetricReport, PairCorrelation};
use crate::features::{self, FeatureError, Standardizer};
use crate::sentbleu::{self, BleuConfig};
use crate::svr::{
    grid_search, default_grid, CvObjective, CvResult, GridRow, Hyperparams, SolverOptions,
    SvrError, SvrModel,
};
use crate::synth::{self, SynthConfig, SynthError};

pub const MODEL_FILE: &str = "model.svr1";
pub const STANDARDIZER_EXT: &str = "std1";
pub const CV_FILE: &str = "cv.tsv";
pub const REPORT_FILE: &str = "report.tsv";
pub const SCORES_FILE: &str = "scores.tsv";
pub const ANALYSIS_FILE: &str = "analysis.tsv";
pub const SYNTH_CORPUS_FILE: &str = "corpus.tsv";
pub const SYNTH_EMBEDDINGS_FILE: &str = "synth.emb1";

const MAX_LISTED_KEYS: usize = 10;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("config: {0}")]
    Config(String),
    #[error("{count} embedding key(s) missing, e.g. {sample:?}")]
    MissingEmbeddings { count: usize, sample: Vec<String> },
    #[error("model expects {model} features but the embeddings give {features}")]
    ModelDim { model: usize, features: usize },
    #[error("I/O error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Embedding(#[from] EmbeddingError),
    #[error(transparent)]
    Feature(#[from] FeatureError),
    #[error(transparent)]
    Svr(#[from] SvrError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Analysis(#[from] AnalysisError),
    #[error(transparent)]
    Synth(#[from] SynthError),
}

impl PipelineError {
    /// 2 for solver non-convergence, 1 for everything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            PipelineError::Svr(SvrError::NotConverged { .. }) => 2,
            _ => 1,
        }
    }
}

pub type Result<T, E = PipelineError> = std::result::Result<T, E>;

fn config_err(msg: impl Into<String>) -> PipelineError {
    PipelineError::Config(msg.into())
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    std::fs::write(path, contents).map_err(|source| PipelineError::Io {
        path: path.display().to_string(),
        source,
    })
}

fn ensure_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|source| PipelineError::Io {
        path: dir.display().to_string(),
        source,
    })
}

/// Parses `c=0.1,1;eps=0.1;gamma=0.01,1`. Omitted keys take the default values.
pub fn parse_grid(spec: &str) -> Result<Vec<Hyperparams>> {
    let default = crate::svr::DEFAULT_GRID_VALUES.to_vec();
    let (mut cs, mut eps, mut gammas) = (default.clone(), default.clone(), default);
    for part in spec.split(';').map(str::trim).filter(|p| !p.is_empty()) {
        let (key, values) = part
            .split_once('=')
            .ok_or_else(|| config_err(format!("grid part `{part}` is not key=values")))?;
        let values = values
            .split(',')
            .map(|v| {
                v.trim()
                    .parse::<f64>()
                    .map_err(|_| config_err(format!("bad grid value `{v}` for `{key}`")))
            })
            .collect::<Result<Vec<f64>>>()?;
        match key.trim() {
            "c" | "C" => cs = values,
            "eps" | "epsilon" => eps = values,
            "gamma" => gammas = values,
            other => return Err(config_err(format!("unknown grid key `{other}`"))),
        }
    }
    let grid = crate::svr::product(&cs, &eps, &gammas);
    for p in &grid {
        p.validate()?;
    }
    Ok(grid)
}

/// Settings from flags or a `key = value` config file; every field optional.
#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Settings {
    pub corpus: Option<PathBuf>,
    /// Comma-separated; order sets the feature layout.
    pub embeddings: Option<String>,
    pub target_pair: Option<String>,
    pub test_dataset: Option<String>,
    pub folds: Option<usize>,
    pub seed: Option<u64>,
    pub grid: Option<String>,
    pub standardize: Option<bool>,
    pub cv_objective: Option<String>,
    pub model: Option<PathBuf>,
    pub out_dir: Option<PathBuf>,
    pub jobs: Option<usize>,
    pub max_iter: Option<u64>,
}

impl Settings {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| config_err(e.to_string()))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| PipelineError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_toml_str(&text)
    }

    /// Fields set in `self` win over those in `fallback`.
    pub fn or(self, fallback: Settings) -> Settings {
        Settings {
            corpus: self.corpus.or(fallback.corpus),
            embeddings: self.embeddings.or(fallback.embeddings),
            target_pair: self.target_pair.or(fallback.target_pair),
            test_dataset: self.test_dataset.or(fallback.test_dataset),
            folds: self.folds.or(fallback.folds),
            seed: self.seed.or(fallback.seed),
            grid: self.grid.or(fallback.grid),
            standardize: self.standardize.or(fallback.standardize),
            cv_objective: self.cv_objective.or(fallback.cv_objective),
            model: self.model.or(fallback.model),
            out_dir: self.out_dir.or(fallback.out_dir),
            jobs: self.jobs.or(fallback.jobs),
            max_iter: self.max_iter.or(fallback.max_iter),
        }
    }

    pub fn require_corpus(&self) -> Result<&Path> {
        self.corpus
            .as_deref()
            .ok_or_else(|| config_err("missing --corpus"))
    }

    pub fn out_dir(&self) -> PathBuf {
        self.out_dir.clone().unwrap_or_else(|| PathBuf::from("."))
    }

    pub fn into_run_config(self) -> Result<RunConfig> {
        let corpus_path = self.require_corpus()?.to_path_buf();
        let embedding_paths: Vec<PathBuf> = self
            .embeddings
            .as_deref()
            .unwrap_or("")
            .split(',')
            .map(str::trim)
            .filter(|p| !p.is_empty())
            .map(PathBuf::from)
            .collect();
        let target_pair = self
            .target_pair
            .as_deref()
            .ok_or_else(|| config_err("missing --target-pair"))?
            .parse()?;
        let test_dataset = self
            .test_dataset
            .clone()
            .ok_or_else(|| config_err("missing --test-dataset"))?;
        let grid = match &self.grid {
            Some(spec) => parse_grid(spec)?,
            None => default_grid(),
        };
        let cv_objective = match &self.cv_objective {
            Some(s) => s.parse().map_err(config_err)?,
            None => CvObjective::default(),
        };
        let config = RunConfig {
            out_dir: self.out_dir(),
            corpus_path,
            embedding_paths,
            target_pair,
            test_dataset,
            grid,
            folds: self.folds.unwrap_or(10),
            seed: self.seed.unwrap_or(42),
            standardize: self.standardize.unwrap_or(true),
            cv_objective,
            model_path: self.model,
            jobs: self.jobs,
            solver: SolverOptions {
                max_iter: self.max_iter.unwrap_or(crate::svr::DEFAULT_MAX_ITER),
                ..SolverOptions::default()
            },
        };
        config.validate()?;
        Ok(config)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub corpus_path: PathBuf,
    pub embedding_paths: Vec<PathBuf>,
    pub target_pair: LanguagePair,
    pub test_dataset: String,
    pub grid: Vec<Hyperparams>,
    pub folds: usize,
    pub seed: u64,
    pub standardize: bool,
    pub cv_objective: CvObjective,
    pub out_dir: PathBuf,
    /// Model read by `evaluate` and `predict`; defaults to `out_dir/model.svr1`.
    pub model_path: Option<PathBuf>,
    /// Grid-search worker threads; `None` uses all cores.
    pub jobs: Option<usize>,
    pub solver: SolverOptions,
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        if self.folds < 2 {
            return Err(config_err(format!("folds must be >= 2, got {}", self.folds)));
        }
        if self.embedding_paths.is_empty() {
            return Err(config_err("need at least one --embeddings path"));
        }
        if self.grid.is_empty() {
            return Err(config_err("grid is empty"));
        }
        if self.jobs == Some(0) {
            return Err(config_err("jobs must be >= 1"));
        }
        Ok(())
    }

    pub fn model_path(&self) -> PathBuf {
        self.model_path
            .clone()
            .unwrap_or_else(|| self.out_dir.join(MODEL_FILE))
    }
}

/// The standardizer saved next to a model: same path, `.std1` extension.
pub fn standardizer_path(model_path: &Path) -> PathBuf {
    model_path.with_extension(STANDARDIZER_EXT)
}

/// Loads every store and concatenates them in the given order.
pub fn load_sources(paths: &[PathBuf]) -> Result<EmbeddingStore> {
    let stores = paths
        .iter()
        .map(load_embeddings)
        .collect::<Result<Vec<_>, _>>()?;
    if stores.len() == 1 {
        return Ok(stores.into_iter().next().unwrap());
    }
    Ok(combine_sources(&stores)?)
}

/// Raw match features for `ids`, in order. Fails listing missing keys.
pub fn feature_matrix(store: &EmbeddingStore, ids: &[String]) -> Result<Vec<Vec<f64>>> {
    let mut missing = Vec::new();
    let mut rows = Vec::with_capacity(ids.len());
    for id in ids {
        let hyp = EmbeddingKey::hyp(id.as_str());
        let reference = EmbeddingKey::reference(id.as_str());
        match (store.lookup(&hyp), store.lookup(&reference)) {
            (Some(t), Some(r)) => rows.push(features::match_features(t, r)?.into_values()),
            (t, r) => {
                if t.is_none() {
                    missing.push(hyp.to_string());
                }
                if r.is_none() {
                    missing.push(reference.to_string());
                }
            }
        }
    }
    if !missing.is_empty() {
        return Err(PipelineError::MissingEmbeddings {
            count: missing.len(),
            sample: missing.into_iter().take(MAX_LISTED_KEYS).collect(),
        });
    }
    Ok(rows)
}

fn standardize_all(s: &Standardizer, rows: Vec<Vec<f64>>) -> Result<Vec<Vec<f64>>> {
    rows.iter()
        .map(|r| Ok(s.apply(r)?.into_values()))
        .collect()
}

fn in_pool<T: Send>(jobs: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    match jobs {
        None => Ok(f()),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| config_err(format!("cannot start {n} worker threads: {e}")))?;
            Ok(pool.install(f))
        }
    }
}

/// Paths written by [`cmd_synth`].
#[derive(Debug, Clone, PartialEq)]
pub struct SynthOutputs {
    pub corpus: PathBuf,
    pub embeddings: PathBuf,
}

pub fn cmd_synth(config: &SynthConfig, out_dir: &Path) -> Result<SynthOutputs> {
    let data = synth::synthesize(config)?;
    ensure_dir(out_dir)?;
    let out = SynthOutputs {
        corpus: out_dir.join(SYNTH_CORPUS_FILE),
        embeddings: out_dir.join(SYNTH_EMBEDDINGS_FILE),
    };
    corpus::write_corpus(&data.corpus, &out.corpus)?;
    data.embeddings.save(&out.embeddings)?;
    Ok(out)
}

/// What [`cmd_train`] produced.
#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub cv: CvResult,
    pub model: SvrModel,
    pub n_train: usize,
    pub model_path: PathBuf,
    pub cv_path: PathBuf,
}

/// Split, featurize, standardize, search the grid, and fit the final model
/// on the whole training side of the split.
pub fn cmd_train(config: &RunConfig) -> Result<TrainOutcome> {
    config.validate()?;
    let corpus = corpus::parse_corpus(&config.corpus_path)?;
    let store = load_sources(&config.embedding_paths)?;
    let split = corpus::leave_one_pair_out_split(&corpus, &config.target_pair, &config.test_dataset)?;
    let raw = feature_matrix(&store, &split.train_ids)?;
    let y: Vec<f64> = split
        .train_ids
        .iter()
        .map(|id| corpus.get(id).expect("split ids come from the corpus").da_score)
        .collect();
    let standardizer = if config.standardize {
        features::fit_standardizer(&raw)?
    } else {
        Standardizer::identity(raw.first().map_or(0, Vec::len))
    };
    let x = standardize_all(&standardizer, raw)?;
    log::info!(
        "training on {} segments ({} features), testing on {} {} segments",
        x.len(),
        standardizer.len(),
        split.test_ids.len(),
        config.target_pair
    );

    let cv = if let [only] = config.grid.as_slice() {
        CvResult {
            rows: vec![GridRow {
                params: *only,
                mean_score: f64::NAN,
                fold_scores: Vec::new(),
                degenerate_folds: Vec::new(),
            }],
            best: *only,
            best_index: 0,
        }
    } else {
        in_pool(config.jobs, || {
            grid_search(
                &x,
                &y,
                &config.grid,
                config.folds,
                config.seed,
                config.cv_objective,
                &config.solver,
            )
        })??
    };
    let model = crate::svr::svr_train(&x, &y, &cv.best, &config.solver)?;

    ensure_dir(&config.out_dir)?;
    let model_path = config.out_dir.join(MODEL_FILE);
    let cv_path = config.out_dir.join(CV_FILE);
    model.save(&model_path)?;
    standardizer.save(standardizer_path(&model_path))?;
    write_file(&cv_path, &cv.to_tsv())?;
    Ok(TrainOutcome {
        n_train: x.len(),
        cv,
        model,
        model_path,
        cv_path,
    })
}

fn load_model(model_path: &Path) -> Result<(SvrModel, Standardizer)> {
    let model = SvrModel::load(model_path)?;
    let standardizer = Standardizer::load(standardizer_path(model_path))?;
    if standardizer.len() != model.dim() {
        return Err(PipelineError::ModelDim {
            model: model.dim(),
            features: standardizer.len(),
        });
    }
    Ok((model, standardizer))
}

fn predict_ids(
    model: &SvrModel,
    standardizer: &Standardizer,
    store: &EmbeddingStore,
    ids: &[String],
) -> Result<Vec<f64>> {
    let raw = feature_matrix(store, ids)?;
    if let Some(first) = raw.first() {
        if first.len() != model.dim() {
            return Err(PipelineError::ModelDim {
                model: model.dim(),
                features: first.len(),
            });
        }
    }
    let x = standardize_all(standardizer, raw)?;
    Ok(model.predict_batch(&x)?)
}

/// Where predictions come from in [`cmd_evaluate`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Predictor {
    #[default]
    Model,
    /// Use the gold DA scores as predictions; for testing the evaluation path.
    OracleDa,
}

#[derive(Debug, Clone)]
pub struct EvaluateOutcome {
    pub report: MetricReport,
    pub report_path: PathBuf,
    pub scores_path: PathBuf,
}

/// Scores the held-out `(target_pair, test_dataset)` segments.
pub fn cmd_evaluate(config: &RunConfig, predictor: Predictor) -> Result<EvaluateOutcome> {
    let corpus = corpus::parse_corpus(&config.corpus_path)?;
    let split = corpus::leave_one_pair_out_split(&corpus, &config.target_pair, &config.test_dataset)?;
    let predictions = match predictor {
        Predictor::OracleDa => split
            .test_ids
            .iter()
            .map(|id| corpus.get(id).expect("split ids come from the corpus").da_score)
            .collect(),
        Predictor::Model => {
            let (model, standardizer) = load_model(&config.model_path())?;
            let store = load_sources(&config.embedding_paths)?;
            predict_ids(&model, &standardizer, &store, &split.test_ids)?
        }
    };
    let scores: HashMap<String, f64> = split
        .test_ids
        .iter()
        .cloned()
        .zip(predictions.iter().copied())
        .collect();
    let report = eval::evaluate_metric(&scores, &corpus, &[config.target_pair.clone()])?;

    ensure_dir(&config.out_dir)?;
    let report_path = config.out_dir.join(REPORT_FILE);
    let scores_path = config.out_dir.join(SCORES_FILE);
    write_file(&report_path, &report.to_tsv())?;
    write_file(
        &scores_path,
        &eval::scores_to_tsv(split.test_ids.iter().map(String::as_str).zip(predictions)),
    )?;
    Ok(EvaluateOutcome {
        report,
        report_path,
        scores_path,
    })
}

/// Scores every corpus segment with the model; writes `scores.tsv`.
pub fn cmd_predict(config: &RunConfig) -> Result<PathBuf> {
    let corpus = corpus::parse_corpus(&config.corpus_path)?;
    let (model, standardizer) = load_model(&config.model_path())?;
    let store = load_sources(&config.embedding_paths)?;
    let ids: Vec<String> = corpus.iter().map(|s| s.id.clone()).collect();
    let predictions = predict_ids(&model, &standardizer, &store, &ids)?;
    ensure_dir(&config.out_dir)?;
    let path = config.out_dir.join(SCORES_FILE);
    write_file(
        &path,
        &eval::scores_to_tsv(ids.iter().map(String::as_str).zip(predictions)),
    )?;
    Ok(path)
}

#[derive(Debug, Clone)]
pub struct AnalyzeRequest {
    pub corpus_path: PathBuf,
    pub metric_a: (String, PathBuf),
    pub metric_b: (String, PathBuf),
    /// Intersected; a token is unknown if any encoder lacks it.
    pub vocab_paths: Vec<PathBuf>,
    pub config: AnalysisConfig,
    pub out_dir: PathBuf,
}

pub fn cmd_analyze(req: &AnalyzeRequest) -> Result<AnalysisReport> {
    if req.vocab_paths.is_empty() {
        return Err(config_err("need at least one --vocab file"));
    }
    let corpus = corpus::parse_corpus(&req.corpus_path)?;
    let scores_a = eval::load_scores(&req.metric_a.1)?;
    let scores_b = eval::load_scores(&req.metric_b.1)?;
    let vocabs = req
        .vocab_paths
        .iter()
        .map(Vocabulary::load)
        .collect::<Result<Vec<_>, _>>()?;
    let vocab = Vocabulary::intersect(&vocabs)?;
    let report = analysis::disagreement_report(
        &req.metric_a.0,
        &scores_a,
        &req.metric_b.0,
        &scores_b,
        corpus.segments(),
        &req.config,
        &vocab,
    )?;
    ensure_dir(&req.out_dir)?;
    write_file(&req.out_dir.join(ANALYSIS_FILE), &report.to_tsv())?;
    Ok(report)
}

/// SentBLEU scores and per-pair correlations, optionally restricted to one dataset.
pub fn cmd_baseline(
    corpus_path: &Path,
    dataset: Option<&str>,
    config: &BleuConfig,
    out_dir: &Path,
) -> Result<MetricReport> {
    let mut corpus = corpus::parse_corpus(corpus_path)?;
    if let Some(dataset) = dataset {
        let ids: Vec<String> = corpus
            .iter()
            .filter(|s| s.dataset == dataset)
            .map(|s| s.id.clone())
            .collect();
        if ids.is_empty() {
            return Err(config_err(format!("no segments in dataset `{dataset}`")));
        }
        corpus = corpus.subset(&ids)?;
    }
    let scores = sentbleu::sentbleu_scores(&corpus, config);
    let report = report_for(&corpus, &scores)?;
    ensure_dir(out_dir)?;
    write_file(&out_dir.join(REPORT_FILE), &report.to_tsv())?;
    write_file(
        &out_dir.join(SCORES_FILE),
        &eval::scores_to_tsv(scores.iter().map(|(id, s)| (id.as_str(), *s))),
    )?;
    Ok(report)
}

fn report_for(corpus: &DACorpus, scores: &[(String, f64)]) -> Result<MetricReport> {
    let map: HashMap<String, f64> = scores.iter().cloned().collect();
    Ok(eval::evaluate_metric(&map, corpus, &corpus.pairs())?)
}

/// One-line summary of a per-pair report, for terminal output.
pub fn summarize(report: &MetricReport) -> String {
    let pairs: Vec<String> = report
        .per_pair
        .iter()
        .map(|PairCorrelation { pair, r, .. }| format!("{pair}={r:.3}"))
        .collect();
    format!("{} avg={:.3}", pairs.join(" "), report.average)
}
