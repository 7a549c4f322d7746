// Synthesize data, train with cross validation, and evaluate on a held-out pair.

use embmte::pipeline::{cmd_evaluate, cmd_synth, cmd_train, parse_grid, Predictor, RunConfig};
use embmte::svr::{CvObjective, SolverOptions};
use embmte::synth::SynthConfig;

pub fn run_example() -> anyhow::Result<()> {
    let dir = tempfile::tempdir()?;
    let files = cmd_synth(
        &SynthConfig {
            n: 300,
            dim: 8,
            noise_sigma: 0.05,
            seed: 7,
        },
        dir.path(),
    )?;
    let config = RunConfig {
        corpus_path: files.corpus,
        embedding_paths: vec![files.embeddings],
        target_pair: "ro-en".parse()?,
        test_dataset: "wmt2016".into(),
        grid: parse_grid("c=1,10;eps=0.01,0.1;gamma=0.01,0.1")?,
        folds: 5,
        seed: 42,
        standardize: true,
        cv_objective: CvObjective::Pearson,
        out_dir: dir.path().join("run"),
        model_path: None,
        jobs: Some(2),
        solver: SolverOptions::default(),
    };
    let trained = cmd_train(&config)?;
    println!("chose {} on {} segments", trained.cv.best, trained.n_train);
    let evaluated = cmd_evaluate(&config, Predictor::Model)?;
    print!("{}", evaluated.report);
    Ok(())
}

#[allow(dead_code)]
fn main() -> anyhow::Result<()> {
    run_example()
}
