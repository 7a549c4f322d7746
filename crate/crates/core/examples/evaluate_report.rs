// Per-pair Pearson correlation between metric scores and DA.

use std::collections::HashMap;

use embmte::eval::{evaluate_metric, pearson, scores_to_tsv};
use embmte::synth::{synthesize, SynthConfig};

pub fn run_example() -> anyhow::Result<()> {
    let r = pearson(&[1.0, 2.0, 3.0], &[1.0, 1.0, 2.0])?;
    println!("r = {:.6} (sqrt(3)/2 = {:.6})", r.r, 3f64.sqrt() / 2.0);

    let data = synthesize(&SynthConfig {
        n: 120,
        dim: 4,
        noise_sigma: 0.05,
        seed: 1,
    })?;
    // a crude metric: the DA score rounded to one decimal
    let scores: HashMap<String, f64> = data
        .corpus
        .iter()
        .map(|s| (s.id.clone(), (s.da_score * 10.0).round() / 10.0))
        .collect();
    let report = evaluate_metric(&scores, &data.corpus, &data.corpus.pairs())?;
    print!("{report}");
    let tsv = scores_to_tsv(scores.iter().take(3).map(|(k, v)| (k.as_str(), *v)));
    print!("{tsv}");
    Ok(())
}

#[allow(dead_code)]
fn main() -> anyhow::Result<()> {
    run_example()
}
