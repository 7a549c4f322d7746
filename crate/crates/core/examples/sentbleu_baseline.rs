// Smoothed sentence BLEU and its correlation with DA.

use embmte::corpus::{DACorpus, Segment};
use embmte::sentbleu::{sent_bleu, sentbleu_report, BleuConfig};

pub fn run_example() -> anyhow::Result<()> {
    let cfg = BleuConfig::default();
    for (hyp, reference) in [
        ("the cat sat on the mat", "the cat sat on the mat"),
        ("the cat sat on a mat", "the cat sat on the mat"),
        ("a dog ran", "the cat sat on the mat"),
    ] {
        println!("{:.4}  {hyp:?} vs {reference:?}", sent_bleu(hyp, reference, &cfg));
    }

    let reference = "the quick brown fox jumps over the lazy dog";
    let words: Vec<&str> = reference.split(' ').collect();
    let segments = (0..20)
        .map(|i| {
            let kept = 1 + i % words.len();
            Ok(Segment {
                id: format!("s{i}"),
                pair: if i % 2 == 0 { "de-en" } else { "cs-en" }.parse()?,
                dataset: "wmt2016".into(),
                system: "sys".into(),
                hypothesis: words[..kept].join(" "),
                reference: reference.into(),
                da_score: kept as f64 / words.len() as f64,
            })
        })
        .collect::<anyhow::Result<Vec<_>>>()?;
    let corpus = DACorpus::new(segments)?;
    print!("{}", sentbleu_report(&corpus, &cfg)?);
    Ok(())
}

#[allow(dead_code)]
fn main() -> anyhow::Result<()> {
    run_example()
}
