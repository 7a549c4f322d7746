// Write EMB1 stores for two encoders, load them back, and concatenate them.

use embmte::embedding_store::{combine_sources, load_embeddings, EmbeddingKey, EmbeddingStore};

pub fn run_example() -> anyhow::Result<()> {
    let dir = tempfile::tempdir()?;
    let mut paths = Vec::new();
    for (name, dim) in [("infersent", 4usize), ("skipthought", 3)] {
        let mut store = EmbeddingStore::new(dim, name);
        for seg in ["s1", "s2"] {
            let base = if seg == "s1" { 0.0 } else { 1.0 };
            let v: Vec<f32> = (0..dim).map(|i| base + i as f32 * 0.5).collect();
            store.insert(EmbeddingKey::hyp(seg).to_string(), v.clone())?;
            store.insert(EmbeddingKey::reference(seg).to_string(), v)?;
        }
        let path = dir.path().join(format!("{name}.emb1"));
        store.save(&path)?;
        paths.push(path);
    }

    let stores = paths
        .iter()
        .map(load_embeddings)
        .collect::<Result<Vec<_>, _>>()?;
    let combined = combine_sources(&stores)?;
    println!(
        "{}: {} keys, dim {}",
        combined.source_name(),
        combined.len(),
        combined.dim()
    );
    let v = combined
        .lookup(&EmbeddingKey::hyp("s2"))
        .expect("key present in both stores");
    println!("s2#hyp = {v:?}");
    assert_eq!(v, [1.0, 1.5, 2.0, 2.5, 1.0, 1.5, 2.0]);
    Ok(())
}

#[allow(dead_code)]
fn main() -> anyhow::Result<()> {
    run_example()
}
