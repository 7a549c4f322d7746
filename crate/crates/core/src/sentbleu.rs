//! Smoothed sentence-level BLEU, the n-gram baseline.
//!
//! `score = BP * exp(1/N * sum_n ln p_n)` with clipped n-gram precisions
//! `p_n` and brevity penalty `BP = min(1, exp(1 - |ref| / |hyp|))`. With
//! add-one smoothing, orders `n >= 2` use `(matches + 1) / (total + 1)`.
//! Tokens come from [`crate::analysis::tokenize`].

use std::collections::HashMap;

use crate::analysis::tokenize;
use crate::corpus::DACorpus;
use crate::eval::{self, MetricReport};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Smoothing {
    /// Add one to numerator and denominator for `n >= 2`.
    #[default]
    Add1PositiveN,
    None,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BleuConfig {
    pub max_n: usize,
    pub smoothing: Smoothing,
}

impl Default for BleuConfig {
    fn default() -> Self {
        Self {
            max_n: 4,
            smoothing: Smoothing::Add1PositiveN,
        }
    }
}

fn ngram_counts(tokens: &[String], n: usize) -> HashMap<&[String], usize> {
    let mut counts = HashMap::new();
    if tokens.len() >= n {
        for w in tokens.windows(n) {
            *counts.entry(w).or_insert(0) += 1;
        }
    }
    counts
}

/// Clipped matches and total hypothesis n-grams of order `n`.
pub(crate) fn clipped_matches(hyp: &[String], reference: &[String], n: usize) -> (usize, usize) {
    let ref_counts = ngram_counts(reference, n);
    let hyp_counts = ngram_counts(hyp, n);
    let matches = hyp_counts
        .iter()
        .map(|(g, &c)| c.min(ref_counts.get(g).copied().unwrap_or(0)))
        .sum();
    (matches, hyp.len().saturating_sub(n - 1))
}

pub fn sent_bleu_tokens(hyp: &[String], reference: &[String], config: &BleuConfig) -> f64 {
    assert!(
        (1..=9).contains(&config.max_n),
        "max_n must be in 1..=9, got {}",
        config.max_n
    );
    if hyp.is_empty() {
        return 0.0;
    }
    let mut log_sum = 0.0;
    for n in 1..=config.max_n {
        let (m, total) = clipped_matches(hyp, reference, n);
        let (m, total) = match config.smoothing {
            Smoothing::Add1PositiveN if n >= 2 => (m + 1, total + 1),
            _ => (m, total),
        };
        if m == 0 || total == 0 {
            return 0.0;
        }
        log_sum += (m as f64 / total as f64).ln();
    }
    let bp = (1.0 - reference.len() as f64 / hyp.len() as f64).exp().min(1.0);
    bp * (log_sum / config.max_n as f64).exp()
}

pub fn sent_bleu(hyp: &str, reference: &str, config: &BleuConfig) -> f64 {
    sent_bleu_tokens(&tokenize(hyp), &tokenize(reference), config)
}

/// SentBLEU of every segment, in corpus order.
pub fn sentbleu_scores(corpus: &DACorpus, config: &BleuConfig) -> Vec<(String, f64)> {
    corpus
        .iter()
        .map(|s| (s.id.clone(), sent_bleu(&s.hypothesis, &s.reference, config)))
        .collect()
}

/// Per-pair Pearson correlation of SentBLEU with DA over the whole corpus.
pub fn sentbleu_report(corpus: &DACorpus, config: &BleuConfig) -> eval::Result<MetricReport> {
    let scores: HashMap<String, f64> = sentbleu_scores(corpus, config).into_iter().collect();
    eval::evaluate_metric(&scores, corpus, &corpus.pairs())
}
