//! Synthetic corpora with a known, learnable quality signal.
//!
//! Each segment gets a random unit hypothesis vector `t` and a reference
//! `r = normalize(t + u * z / |z|)` with `z` Gaussian and `u ~ U(0, 1.5)`.
//! The DA score is `exp(-|t - r|^2)` plus `N(0, noise_sigma)` noise, computed
//! from the `f32` vectors exactly as they are stored.

use rand::{RngExt, SeedableRng};
use rand_distr::StandardNormal;
use rand_pcg::Pcg64;
use thiserror::Error;

use crate::corpus::{CorpusError, DACorpus, LanguagePair, Segment};
use crate::embedding_store::{EmbeddingError, EmbeddingKey, EmbeddingStore};

pub const SYNTH_DATASET: &str = "wmt2016";
pub const SYNTH_SYSTEM: &str = "synth";
pub const SYNTH_SOURCES: [&str; 6] = ["cs", "de", "fi", "ro", "ru", "tr"];
const MAX_PERTURBATION: f64 = 1.5;

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("synth needs n >= 10 and dim >= 2 (got n={n}, dim={dim})")]
    Size { n: usize, dim: usize },
    #[error("noise sigma must be finite and >= 0, got {0}")]
    Noise(f64),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Embedding(#[from] EmbeddingError),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SynthConfig {
    pub n: usize,
    pub dim: usize,
    pub noise_sigma: f64,
    pub seed: u64,
}

#[derive(Debug, Clone)]
pub struct SynthData {
    pub corpus: DACorpus,
    pub embeddings: EmbeddingStore,
}

fn gaussian_vec(rng: &mut Pcg64, dim: usize) -> Vec<f64> {
    (0..dim).map(|_| rng.sample::<f64, _>(StandardNormal)).collect()
}

fn normalize(v: &mut [f64]) {
    let norm = v.iter().map(|a| a * a).sum::<f64>().sqrt();
    for a in v {
        *a /= norm;
    }
}

fn unit_vec(rng: &mut Pcg64, dim: usize) -> Vec<f64> {
    loop {
        let mut v = gaussian_vec(rng, dim);
        if v.iter().any(|&a| a != 0.0) {
            normalize(&mut v);
            return v;
        }
    }
}

/// Segments go round-robin over the six `xx-en` pairs, all in [`SYNTH_DATASET`].
pub fn synthesize(config: &SynthConfig) -> Result<SynthData, SynthError> {
    let SynthConfig {
        n,
        dim,
        noise_sigma,
        seed,
    } = *config;
    if n < 10 || dim < 2 {
        return Err(SynthError::Size { n, dim });
    }
    if !(noise_sigma.is_finite() && noise_sigma >= 0.0) {
        return Err(SynthError::Noise(noise_sigma));
    }
    let pairs = SYNTH_SOURCES
        .iter()
        .map(|s| LanguagePair::new(s, "en"))
        .collect::<Result<Vec<_>, _>>()?;
    let mut rng = Pcg64::seed_from_u64(seed);
    let mut store = EmbeddingStore::new(dim, "synth");
    let mut segments = Vec::with_capacity(n);
    let mut line_in_pair = vec![0usize; pairs.len()];

    for i in 0..n {
        let p = i % pairs.len();
        line_in_pair[p] += 1;
        let pair = &pairs[p];
        let id = Segment::default_id(SYNTH_DATASET, pair, SYNTH_SYSTEM, line_in_pair[p]);

        let t = unit_vec(&mut rng, dim);
        let direction = unit_vec(&mut rng, dim);
        let u = rng.random_range(0.0..MAX_PERTURBATION);
        let mut r: Vec<f64> = t.iter().zip(&direction).map(|(a, z)| a + u * z).collect();
        normalize(&mut r);

        let t32: Vec<f32> = t.iter().map(|&a| a as f32).collect();
        let r32: Vec<f32> = r.iter().map(|&a| a as f32).collect();
        let dist2: f64 = t32
            .iter()
            .zip(&r32)
            .map(|(&a, &b)| {
                let d = f64::from(a) - f64::from(b);
                d * d
            })
            .sum();
        let noise = if noise_sigma > 0.0 {
            noise_sigma * rng.sample::<f64, _>(StandardNormal)
        } else {
            0.0
        };

        store.insert(EmbeddingKey::hyp(id.as_str()).to_string(), t32)?;
        store.insert(EmbeddingKey::reference(id.as_str()).to_string(), r32)?;
        segments.push(Segment {
            hypothesis: format!("hyp {id}"),
            reference: format!("ref {id}"),
            id,
            pair: pair.clone(),
            dataset: SYNTH_DATASET.to_owned(),
            system: SYNTH_SYSTEM.to_owned(),
            da_score: (-dist2).exp() + noise,
        });
    }
    Ok(SynthData {
        corpus: DACorpus::new(segments)?,
        embeddings: store,
    })
}
