// Where do two metrics disagree on the best translations?

use std::collections::HashMap;

use embmte::analysis::{disagreement_report, AnalysisConfig, Vocabulary};
use embmte::corpus::Segment;

pub fn run_example() -> anyhow::Result<()> {
    let pairs = ["cs-en", "de-en"];
    let mut segments = Vec::new();
    for pair in pairs {
        for i in 0..30 {
            let (hyp, reference) = match i % 3 {
                0 => ("the committee approved the plan", "the committee approved the plan"),
                1 => ("the panel endorsed the scheme", "the committee approved the plan"),
                _ => ("zyxwv approved it", "the committee approved the plan"),
            };
            segments.push(Segment {
                id: format!("{pair}/{i}"),
                pair: pair.parse()?,
                dataset: "wmt2016".into(),
                system: "sys".into(),
                hypothesis: hyp.into(),
                reference: reference.into(),
                da_score: i as f64,
            });
        }
    }
    // embedding metric follows DA; the n-gram metric rewards surface overlap
    let embedding: HashMap<String, f64> =
        segments.iter().map(|s| (s.id.clone(), s.da_score)).collect();
    let ngram: HashMap<String, f64> = segments
        .iter()
        .map(|s| {
            let exact = f64::from(u8::from(s.hypothesis == s.reference));
            (s.id.clone(), exact + s.da_score / 1000.0)
        })
        .collect();
    let vocab = Vocabulary::parse(
        "encoder",
        "the\ncommittee\napproved\nplan\npanel\nendorsed\nscheme\nit\n",
    )?;
    let report = disagreement_report(
        "embedding",
        &embedding,
        "sentbleu",
        &ngram,
        &segments,
        &AnalysisConfig::default(),
        &vocab,
    )?;
    print!("{report}");
    print!("{}", report.to_tsv());
    Ok(())
}

#[allow(dead_code)]
fn main() -> anyhow::Result<()> {
    run_example()
}
