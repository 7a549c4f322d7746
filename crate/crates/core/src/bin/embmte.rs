use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use embmte::analysis::AnalysisConfig;
use embmte::pipeline::{self, AnalyzeRequest, PipelineError, Predictor, Settings};
use embmte::sentbleu::BleuConfig;
use embmte::synth::SynthConfig;

#[derive(Parser)]
#[command(name = "embmte", version, about = "Sentence-embedding MT evaluation with an RBF SVR")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a synthetic corpus and matching embeddings.
    Synth {
        #[arg(long, default_value_t = 1000)]
        n: usize,
        #[arg(long, default_value_t = 32)]
        dim: usize,
        #[arg(long, default_value_t = 0.05)]
        noise_sigma: f64,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(long, default_value = ".")]
        out_dir: PathBuf,
    },
    /// Cross-validate the grid and fit the final model.
    Train(RunArgs),
    /// Report held-out Pearson correlation on the target pair.
    Evaluate {
        #[command(flatten)]
        run: RunArgs,
        /// Use gold DA as predictions instead of a model.
        #[arg(long)]
        oracle_da: bool,
    },
    /// Score every corpus segment with a trained model.
    Predict(RunArgs),
    /// Break down where two metrics disagree on top-DA segments.
    Analyze(AnalyzeArgs),
    /// Score the corpus with smoothed sentence BLEU.
    Baseline {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        corpus: Option<PathBuf>,
        /// Only score this dataset.
        #[arg(long)]
        test_dataset: Option<String>,
        #[arg(long, default_value_t = 4)]
        max_n: usize,
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
}

#[derive(Args)]
struct RunArgs {
    /// `key = value` file; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    corpus: Option<PathBuf>,
    /// Comma-separated EMB1 files, concatenated in this order.
    #[arg(long)]
    embeddings: Option<String>,
    #[arg(long)]
    target_pair: Option<String>,
    #[arg(long)]
    test_dataset: Option<String>,
    #[arg(long)]
    folds: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// e.g. `c=0.1,1;eps=0.1;gamma=0.01,0.1`
    #[arg(long)]
    grid: Option<String>,
    #[arg(long)]
    no_standardize: bool,
    /// pearson or neg_mse
    #[arg(long)]
    cv_objective: Option<String>,
    #[arg(long)]
    model: Option<PathBuf>,
    #[arg(long)]
    out_dir: Option<PathBuf>,
    #[arg(long, env = "EMBMTE_JOBS")]
    jobs: Option<usize>,
    /// SMO iteration cap; hitting it exits with status 2.
    #[arg(long)]
    max_iter: Option<u64>,
}

#[derive(Args)]
struct AnalyzeArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    corpus: Option<PathBuf>,
    #[arg(long)]
    scores_a: PathBuf,
    #[arg(long)]
    scores_b: PathBuf,
    #[arg(long)]
    name_a: Option<String>,
    #[arg(long)]
    name_b: Option<String>,
    /// Comma-separated vocabulary files, one token per line.
    #[arg(long, value_delimiter = ',', required = true)]
    vocab: Vec<PathBuf>,
    #[arg(long, default_value_t = 0.2)]
    top_fraction: f64,
    #[arg(long, default_value_t = 0.5)]
    overlap_threshold: f64,
    #[arg(long, default_value_t = 15)]
    short_length_max: usize,
    #[arg(long, default_value_t = 0.8)]
    high_quality_quantile: f64,
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

fn with_file(config: &Option<PathBuf>, flags: Settings) -> Result<Settings, PipelineError> {
    Ok(match config {
        Some(path) => flags.or(Settings::load(path)?),
        None => flags,
    })
}

impl RunArgs {
    fn settings(self) -> Result<Settings, PipelineError> {
        let flags = Settings {
            corpus: self.corpus,
            embeddings: self.embeddings,
            target_pair: self.target_pair,
            test_dataset: self.test_dataset,
            folds: self.folds,
            seed: self.seed,
            grid: self.grid,
            standardize: self.no_standardize.then_some(false),
            cv_objective: self.cv_objective,
            model: self.model,
            out_dir: self.out_dir,
            jobs: self.jobs,
            max_iter: self.max_iter,
        };
        with_file(&self.config, flags)
    }
}

fn stem(path: &std::path::Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default()
}

fn run(cli: Cli) -> Result<(), PipelineError> {
    match cli.command {
        Command::Synth {
            n,
            dim,
            noise_sigma,
            seed,
            out_dir,
        } => {
            let cfg = SynthConfig {
                n,
                dim,
                noise_sigma,
                seed,
            };
            let out = pipeline::cmd_synth(&cfg, &out_dir)?;
            println!("wrote {} and {}", out.corpus.display(), out.embeddings.display());
        }
        Command::Train(args) => {
            let config = args.settings()?.into_run_config()?;
            let out = pipeline::cmd_train(&config)?;
            let best = out.cv.best_row();
            println!(
                "best {} (mean CV score {}) on {} training segments",
                out.cv.best, best.mean_score, out.n_train
            );
            println!("wrote {} and {}", out.model_path.display(), out.cv_path.display());
        }
        Command::Evaluate { run, oracle_da } => {
            let mut settings = run.settings()?;
            if oracle_da && settings.embeddings.is_none() {
                settings.embeddings = Some("-".into());
            }
            let config = settings.into_run_config()?;
            let predictor = if oracle_da {
                Predictor::OracleDa
            } else {
                Predictor::Model
            };
            let out = pipeline::cmd_evaluate(&config, predictor)?;
            print!("{}", out.report);
        }
        Command::Predict(args) => {
            let config = args.settings()?.into_run_config()?;
            let path = pipeline::cmd_predict(&config)?;
            println!("wrote {}", path.display());
        }
        Command::Analyze(a) => {
            let settings = with_file(
                &a.config,
                Settings {
                    corpus: a.corpus,
                    out_dir: a.out_dir,
                    ..Default::default()
                },
            )?;
            let req = AnalyzeRequest {
                corpus_path: settings.require_corpus()?.to_path_buf(),
                metric_a: (a.name_a.unwrap_or_else(|| stem(&a.scores_a)), a.scores_a),
                metric_b: (a.name_b.unwrap_or_else(|| stem(&a.scores_b)), a.scores_b),
                vocab_paths: a.vocab,
                config: AnalysisConfig {
                    top_fraction: a.top_fraction,
                    overlap_threshold: a.overlap_threshold,
                    short_length_max: a.short_length_max,
                    high_quality_quantile: a.high_quality_quantile,
                },
                out_dir: settings.out_dir(),
            };
            print!("{}", pipeline::cmd_analyze(&req)?);
        }
        Command::Baseline {
            config,
            corpus,
            test_dataset,
            max_n,
            out_dir,
        } => {
            let settings = with_file(
                &config,
                Settings {
                    corpus,
                    test_dataset,
                    out_dir,
                    ..Default::default()
                },
            )?;
            if !(1..=9).contains(&max_n) {
                return Err(PipelineError::Config(format!("max-n must be in 1..=9, got {max_n}")));
            }
            let bleu = BleuConfig {
                max_n,
                ..Default::default()
            };
            let report = pipeline::cmd_baseline(
                settings.require_corpus()?,
                settings.test_dataset.as_deref(),
                &bleu,
                &settings.out_dir(),
            )?;
            print!("{report}");
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
