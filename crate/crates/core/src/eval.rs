//! Segment-level Pearson correlation against DA scores.

use std::collections::HashMap;
use std::fmt;
use std::fmt::Write as _;
use std::path::Path;

use thiserror::Error;

use crate::corpus::{DACorpus, LanguagePair};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("need at least 2 values, got {0}")]
    TooShort(usize),
    #[error("no prediction for segment `{0}`")]
    MissingPrediction(String),
    #[error("no segments for language pair {0}")]
    EmptyPair(LanguagePair),
    #[error("no language pairs to evaluate")]
    NoPairs,
    #[error("scores file line {line}: {message}")]
    ScoresFormat { line: usize, message: String },
    #[error("I/O error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T, E = EvalError> = std::result::Result<T, E>;

/// A correlation value, flagged when one input was constant (then `r = 0`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pearson {
    pub r: f64,
    pub degenerate: bool,
}

/// Sample Pearson correlation by the two-pass (mean-centred) formula,
/// clamped to `[-1, 1]`.
///
/// A constant input has no defined correlation; it yields `r = 0` with
/// `degenerate` set instead of an error so one bad fold cannot abort a
/// cross-validation run.
pub fn pearson(x: &[f64], y: &[f64]) -> Result<Pearson> {
    if x.len() != y.len() {
        return Err(EvalError::LengthMismatch(x.len(), y.len()));
    }
    if x.len() < 2 {
        return Err(EvalError::TooShort(x.len()));
    }
    let constant = |v: &[f64]| v.iter().all(|&a| a == v[0]);
    if constant(x) || constant(y) {
        log::warn!("constant input to Pearson correlation; scoring 0");
        return Ok(Pearson {
            r: 0.0,
            degenerate: true,
        });
    }
    Ok(Pearson {
        r: pearson_unclamped(x, y).clamp(-1.0, 1.0),
        degenerate: false,
    })
}

pub(crate) fn pearson_unclamped(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxx += dx * dx;
        syy += dy * dy;
        sxy += dx * dy;
    }
    sxy / (sxx.sqrt() * syy.sqrt())
}

#[derive(Debug, Clone, PartialEq)]
pub struct PairCorrelation {
    pub pair: LanguagePair,
    pub n: usize,
    pub r: f64,
    pub degenerate: bool,
}

/// Per-language-pair correlations and their unweighted mean.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricReport {
    pub per_pair: Vec<PairCorrelation>,
    pub average: f64,
}

impl MetricReport {
    pub fn from_pairs(per_pair: Vec<PairCorrelation>) -> Result<Self> {
        if per_pair.is_empty() {
            return Err(EvalError::NoPairs);
        }
        let average = per_pair.iter().map(|p| p.r).sum::<f64>() / per_pair.len() as f64;
        Ok(Self { per_pair, average })
    }

    pub fn get(&self, pair: &LanguagePair) -> Option<f64> {
        self.per_pair.iter().find(|p| &p.pair == pair).map(|p| p.r)
    }

    /// `pair\tn\tpearson` rows followed by `avg\t-\t<mean>`.
    pub fn to_tsv(&self) -> String {
        let mut out = String::from("pair\tn\tpearson\n");
        for p in &self.per_pair {
            let _ = writeln!(out, "{}\t{}\t{}", p.pair, p.n, p.r);
        }
        let _ = writeln!(out, "avg\t-\t{}", self.average);
        out
    }
}

impl fmt::Display for MetricReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{:<8} {:>6} {:>8}", "pair", "n", "pearson")?;
        writeln!(f, "{}", "-".repeat(24))?;
        for p in &self.per_pair {
            let mark = if p.degenerate { " (constant input)" } else { "" };
            writeln!(f, "{:<8} {:>6} {:>8.3}{mark}", p.pair.to_string(), p.n, p.r)?;
        }
        writeln!(f, "{}", "-".repeat(24))?;
        writeln!(f, "{:<8} {:>6} {:>8.3}", "avg", "", self.average)
    }
}

/// Correlates predictions with DA scores separately for each requested pair.
pub fn evaluate_metric(
    predictions: &HashMap<String, f64>,
    corpus: &DACorpus,
    pairs: &[LanguagePair],
) -> Result<MetricReport> {
    let mut per_pair = Vec::with_capacity(pairs.len());
    for pair in pairs {
        let mut predicted = Vec::new();
        let mut human = Vec::new();
        for seg in corpus.iter().filter(|s| &s.pair == pair) {
            let p = predictions
                .get(&seg.id)
                .ok_or_else(|| EvalError::MissingPrediction(seg.id.clone()))?;
            predicted.push(*p);
            human.push(seg.da_score);
        }
        if predicted.is_empty() {
            return Err(EvalError::EmptyPair(pair.clone()));
        }
        let p = pearson(&predicted, &human)?;
        per_pair.push(PairCorrelation {
            pair: pair.clone(),
            n: predicted.len(),
            r: p.r,
            degenerate: p.degenerate,
        });
    }
    MetricReport::from_pairs(per_pair)
}

/// `seg_id\tscore` lines, in the given order.
pub fn scores_to_tsv<'a>(scores: impl IntoIterator<Item = (&'a str, f64)>) -> String {
    let mut out = String::from("seg_id\tscore\n");
    for (id, s) in scores {
        let _ = writeln!(out, "{id}\t{s}");
    }
    out
}

pub fn parse_scores_tsv(text: &str) -> Result<HashMap<String, f64>> {
    let body = text.strip_suffix('\n').unwrap_or(text);
    let mut lines = body.split('\n').enumerate();
    match lines.next() {
        Some((_, "seg_id\tscore")) => {}
        _ => {
            return Err(EvalError::ScoresFormat {
                line: 1,
                message: "expected header `seg_id\\tscore`".into(),
            })
        }
    }
    let mut scores = HashMap::new();
    for (i, line) in lines {
        let err = |message: String| EvalError::ScoresFormat {
            line: i + 1,
            message,
        };
        let (id, value) = line
            .split_once('\t')
            .ok_or_else(|| err("expected 2 tab-separated columns".into()))?;
        let v: f64 = value
            .parse()
            .map_err(|_| err(format!("`{value}` is not a number")))?;
        if !v.is_finite() {
            return Err(err(format!("`{value}` is not finite")));
        }
        if scores.insert(id.to_owned(), v).is_some() {
            return Err(err(format!("duplicate segment id `{id}`")));
        }
    }
    Ok(scores)
}

pub fn load_scores(path: impl AsRef<Path>) -> Result<HashMap<String, f64>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| EvalError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_scores_tsv(&text)
}
