// Build a DA corpus, round-trip it through TSV, and split it for training.

use embmte::corpus::{
    kfold_assign, leave_one_pair_out_split, parse_corpus, write_corpus, DACorpus, LanguagePair,
    Segment,
};

pub fn run_example() -> anyhow::Result<()> {
    let mut segments = Vec::new();
    for (dataset, sources, per_pair) in [
        ("wmt2015", &["cs", "de", "fi", "ru"][..], 5),
        ("wmt2016", &["cs", "de", "fi", "ro", "ru", "tr"][..], 6),
    ] {
        for src in sources {
            let pair = LanguagePair::new(src, "en")?;
            for line in 1..=per_pair {
                segments.push(Segment {
                    id: Segment::default_id(dataset, &pair, "sys", line),
                    pair: pair.clone(),
                    dataset: dataset.to_string(),
                    system: "sys".to_string(),
                    hypothesis: format!("hypothesis {line}"),
                    reference: format!("reference {line}"),
                    da_score: line as f64 / per_pair as f64,
                });
            }
        }
    }
    let corpus = DACorpus::new(segments)?;

    let dir = tempfile::tempdir()?;
    let path = dir.path().join("corpus.tsv");
    write_corpus(&corpus, &path)?;
    let corpus = parse_corpus(&path)?;
    println!("{} segments over {} pairs", corpus.len(), corpus.pairs().len());

    let split = leave_one_pair_out_split(&corpus, &"de-en".parse()?, "wmt2016")?;
    println!(
        "hold out de-en/wmt2016: {} train, {} test",
        split.train_ids.len(),
        split.test_ids.len()
    );
    assert_eq!(split.train_ids.len(), 20 + 30);
    assert_eq!(split.test_ids.len(), 6);

    let folds = kfold_assign(split.train_ids.len(), 5, 42)?;
    let mut sizes = [0usize; 5];
    for f in folds {
        sizes[f] += 1;
    }
    println!("fold sizes {sizes:?}");
    Ok(())
}

#[allow(dead_code)]
fn main() -> anyhow::Result<()> {
    run_example()
}
