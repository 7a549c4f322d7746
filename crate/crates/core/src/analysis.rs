//! Error analysis: where do two metrics disagree on high-quality translations?
//!
//! The procedure keeps the top fraction of segments by DA score in each
//! language pair, marks each segment "high" under a metric when the metric's
//! score is in that metric's own top quantile for the pair, and breaks down
//! the segments only one metric rates high by surface word overlap, unknown
//! words, and hypothesis length.

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::fmt::Write as _;
use std::path::Path;

use thiserror::Error;

use crate::corpus::{LanguagePair, Segment};

#[derive(Debug, Error)]
pub enum AnalysisError {
    #[error("invalid analysis config: {0}")]
    Config(String),
    #[error("no {metric} score for segment `{id}`")]
    MissingScore { metric: String, id: String },
    #[error("vocabulary `{0}` is empty")]
    EmptyVocabulary(String),
    #[error("I/O error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T, E = AnalysisError> = std::result::Result<T, E>;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnalysisConfig {
    /// Fraction of each pair's segments kept, by descending DA score.
    pub top_fraction: f64,
    /// Word overlap below this counts as a low surface match.
    pub overlap_threshold: f64,
    /// Hypotheses with at most this many tokens are short.
    pub short_length_max: usize,
    /// A metric rates a segment high when its score reaches this per-pair quantile.
    pub high_quality_quantile: f64,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        Self {
            top_fraction: 0.2,
            overlap_threshold: 0.5,
            short_length_max: 15,
            high_quality_quantile: 0.8,
        }
    }
}

impl AnalysisConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(AnalysisError::Config(m));
        if !(self.top_fraction > 0.0 && self.top_fraction <= 1.0) {
            return bad(format!("top_fraction {} not in (0, 1]", self.top_fraction));
        }
        if !(0.0..=1.0).contains(&self.overlap_threshold) {
            return bad(format!(
                "overlap_threshold {} not in [0, 1]",
                self.overlap_threshold
            ));
        }
        if !(0.0..1.0).contains(&self.high_quality_quantile) {
            return bad(format!(
                "high_quality_quantile {} not in [0, 1)",
                self.high_quality_quantile
            ));
        }
        Ok(())
    }
}

/// Tokens an encoder maps to a known-word representation.
#[derive(Debug, Clone, PartialEq)]
pub struct Vocabulary {
    pub source_name: String,
    tokens: HashSet<String>,
}

impl Vocabulary {
    pub fn new(
        source_name: impl Into<String>,
        tokens: impl IntoIterator<Item = String>,
    ) -> Result<Self> {
        let source_name = source_name.into();
        let tokens: HashSet<String> = tokens.into_iter().collect();
        if tokens.is_empty() {
            return Err(AnalysisError::EmptyVocabulary(source_name));
        }
        Ok(Self {
            source_name,
            tokens,
        })
    }

    /// One token per line; blank lines are skipped.
    pub fn parse(source_name: impl Into<String>, text: &str) -> Result<Self> {
        Self::new(
            source_name,
            text.lines()
                .map(str::trim)
                .filter(|l| !l.is_empty())
                .map(str::to_owned),
        )
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| AnalysisError::Io {
            path: path.display().to_string(),
            source,
        })?;
        let name = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default();
        Self::parse(name, &text)
    }

    /// Tokens known to every vocabulary: a token is unknown to the result
    /// iff at least one encoder treats it as unknown.
    pub fn intersect(vocabs: &[Vocabulary]) -> Result<Self> {
        let (first, rest) = vocabs
            .split_first()
            .ok_or_else(|| AnalysisError::EmptyVocabulary(String::from("<none>")))?;
        let tokens = first
            .tokens
            .iter()
            .filter(|t| rest.iter().all(|v| v.contains(t)))
            .cloned();
        let name = vocabs
            .iter()
            .map(|v| v.source_name.as_str())
            .collect::<Vec<_>>()
            .join("&");
        Self::new(name, tokens)
    }

    pub fn contains(&self, token: &str) -> bool {
        self.tokens.contains(token)
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }
}

/// Lowercases, splits on whitespace, and strips leading and trailing ASCII
/// punctuation from each token. Empty tokens are dropped.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split_whitespace()
        .map(|w| w.trim_matches(|c: char| c.is_ascii_punctuation()).to_lowercase())
        .filter(|w| !w.is_empty())
        .collect()
}

/// `ceil(fraction * n)` without float noise pushing an exact product up.
pub(crate) fn top_count(fraction: f64, n: usize) -> usize {
    if n == 0 {
        return 0;
    }
    (((fraction * n as f64) - 1e-9).ceil() as usize).clamp(1, n)
}

fn group_by_pair<'a>(segments: &'a [Segment]) -> Vec<(LanguagePair, Vec<&'a Segment>)> {
    let mut groups: Vec<(LanguagePair, Vec<&Segment>)> = Vec::new();
    let mut index: HashMap<&LanguagePair, usize> = HashMap::new();
    for s in segments {
        let g = *index.entry(&s.pair).or_insert_with(|| {
            groups.push((s.pair.clone(), Vec::new()));
            groups.len() - 1
        });
        groups[g].1.push(s);
    }
    groups
}

/// Per language pair, the `ceil(fraction * n)` segments with the highest DA
/// score; ties at the cut go to the smaller segment id. Output is grouped by
/// pair (first-appearance order), best first within each pair.
pub fn top_da_fraction(segments: &[Segment], fraction: f64) -> Vec<Segment> {
    let mut out = Vec::new();
    for (_, mut group) in group_by_pair(segments) {
        group.sort_by(|a, b| b.da_score.total_cmp(&a.da_score).then_with(|| a.id.cmp(&b.id)));
        let keep = top_count(fraction, group.len());
        out.extend(group.into_iter().take(keep).cloned());
    }
    out
}

/// Fraction of hypothesis tokens matched in the reference, with clipped counts.
pub fn word_overlap_rate(hyp: &str, reference: &str) -> f64 {
    let hyp = tokenize(hyp);
    let mut available: HashMap<String, usize> = HashMap::new();
    for t in tokenize(reference) {
        *available.entry(t).or_insert(0) += 1;
    }
    let mut matched = 0usize;
    for t in &hyp {
        if let Some(c) = available.get_mut(t) {
            if *c > 0 {
                *c -= 1;
                matched += 1;
            }
        }
    }
    matched as f64 / hyp.len().max(1) as f64
}

/// True iff some hypothesis token is missing from `vocab`.
pub fn oov_flag(segment: &Segment, vocab: &Vocabulary) -> bool {
    tokenize(&segment.hypothesis)
        .iter()
        .any(|t| !vocab.contains(t))
}

/// Counts of OOV-flagged hypotheses split by length.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct LengthCrossTab {
    pub oov_short: usize,
    pub oov_long: usize,
    pub known_short: usize,
    pub known_long: usize,
}

impl LengthCrossTab {
    pub fn oov(&self) -> usize {
        self.oov_short + self.oov_long
    }
}

/// Segments rated high by exactly one metric, and their breakdown.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct DisagreementCounts {
    pub total: usize,
    pub low_overlap: usize,
    pub by_length: LengthCrossTab,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PairBreakdown {
    pub pair: Option<LanguagePair>,
    /// Segments in the top-DA selection.
    pub analysed: usize,
    pub both_high: usize,
    pub only_a: DisagreementCounts,
    pub only_b: DisagreementCounts,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnalysisReport {
    pub metric_a: String,
    pub metric_b: String,
    pub config: AnalysisConfig,
    pub per_pair: Vec<PairBreakdown>,
    pub total: PairBreakdown,
}

impl AnalysisReport {
    /// Same report with the roles of the two metrics exchanged.
    pub fn swapped(&self) -> Self {
        let swap = |b: &PairBreakdown| PairBreakdown {
            only_a: b.only_b,
            only_b: b.only_a,
            ..b.clone()
        };
        Self {
            metric_a: self.metric_b.clone(),
            metric_b: self.metric_a.clone(),
            config: self.config,
            per_pair: self.per_pair.iter().map(swap).collect(),
            total: swap(&self.total),
        }
    }

    pub fn to_tsv(&self) -> String {
        let c = &self.config;
        let mut out = format!(
            "# metric_a={} metric_b={} top_fraction={} high_quality_quantile={} overlap_threshold={} short_length_max={}\n",
            self.metric_a,
            self.metric_b,
            c.top_fraction,
            c.high_quality_quantile,
            c.overlap_threshold,
            c.short_length_max
        );
        out.push_str(
            "pair\tanalysed\tboth_high\tonly\tcount\tlow_overlap\toov\toov_short\toov_long\tknown_short\tknown_long\n",
        );
        let rows = self.per_pair.iter().chain(std::iter::once(&self.total));
        for b in rows {
            let pair = b.pair.as_ref().map_or("all".to_string(), |p| p.to_string());
            for (name, d) in [(&self.metric_a, &b.only_a), (&self.metric_b, &b.only_b)] {
                let t = &d.by_length;
                let _ = writeln!(
                    out,
                    "{pair}\t{}\t{}\t{name}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
                    b.analysed,
                    b.both_high,
                    d.total,
                    d.low_overlap,
                    t.oov(),
                    t.oov_short,
                    t.oov_long,
                    t.known_short,
                    t.known_long
                );
            }
        }
        out
    }
}

impl fmt::Display for AnalysisReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let t = &self.total;
        let c = &self.config;
        writeln!(
            f,
            "Analysed {} segments (top {:.0}% by DA in each of {} pairs).",
            t.analysed,
            c.top_fraction * 100.0,
            self.per_pair.len()
        )?;
        writeln!(f, "Both metrics rate {} of them high.", t.both_high)?;
        for (name, d) in [(&self.metric_a, &t.only_a), (&self.metric_b, &t.only_b)] {
            writeln!(
                f,
                "Only {name} rates {} high: {} with word overlap < {}, {} with unknown words ({} of them with <= {} tokens).",
                d.total,
                d.low_overlap,
                c.overlap_threshold,
                d.by_length.oov(),
                d.by_length.oov_short,
                c.short_length_max
            )?;
        }
        Ok(())
    }
}

/// Order-statistic threshold: the `ceil((1 - q) * n)`-th largest score.
/// Invariant under any strictly increasing transform of the scores.
fn high_threshold(scores: &mut [f64], quantile: f64) -> f64 {
    scores.sort_by(|a, b| b.total_cmp(a));
    let k = top_count(1.0 - quantile, scores.len());
    scores[k - 1]
}

fn lookup(
    scores: &HashMap<String, f64>,
    metric: &str,
    id: &str,
) -> Result<f64> {
    scores
        .get(id)
        .copied()
        .ok_or_else(|| AnalysisError::MissingScore {
            metric: metric.to_owned(),
            id: id.to_owned(),
        })
}

fn tally(d: &mut DisagreementCounts, seg: &Segment, config: &AnalysisConfig, vocab: &Vocabulary) {
    d.total += 1;
    if word_overlap_rate(&seg.hypothesis, &seg.reference) < config.overlap_threshold {
        d.low_overlap += 1;
    }
    let short = tokenize(&seg.hypothesis).len() <= config.short_length_max;
    let t = &mut d.by_length;
    match (oov_flag(seg, vocab), short) {
        (true, true) => t.oov_short += 1,
        (true, false) => t.oov_long += 1,
        (false, true) => t.known_short += 1,
        (false, false) => t.known_long += 1,
    }
}

fn add(total: &mut DisagreementCounts, part: &DisagreementCounts) {
    total.total += part.total;
    total.low_overlap += part.low_overlap;
    total.by_length.oov_short += part.by_length.oov_short;
    total.by_length.oov_long += part.by_length.oov_long;
    total.by_length.known_short += part.by_length.known_short;
    total.by_length.known_long += part.by_length.known_long;
}

/// Compares where metrics A and B rate top-DA segments as high quality.
///
/// Each metric's high/low cut is its own per-pair quantile over all of
/// `segments` of that pair; the comparison is then restricted to the
/// [`top_da_fraction`] selection.
pub fn disagreement_report(
    metric_a: &str,
    scores_a: &HashMap<String, f64>,
    metric_b: &str,
    scores_b: &HashMap<String, f64>,
    segments: &[Segment],
    config: &AnalysisConfig,
    vocab: &Vocabulary,
) -> Result<AnalysisReport> {
    config.validate()?;
    let mut per_pair = Vec::new();
    let mut total = PairBreakdown::default();
    for (pair, group) in group_by_pair(segments) {
        let mut a_all = Vec::with_capacity(group.len());
        let mut b_all = Vec::with_capacity(group.len());
        for s in &group {
            a_all.push(lookup(scores_a, metric_a, &s.id)?);
            b_all.push(lookup(scores_b, metric_b, &s.id)?);
        }
        let a_cut = high_threshold(&mut a_all, config.high_quality_quantile);
        let b_cut = high_threshold(&mut b_all, config.high_quality_quantile);

        let owned: Vec<Segment> = group.into_iter().cloned().collect();
        let top = top_da_fraction(&owned, config.top_fraction);
        let mut b = PairBreakdown {
            pair: Some(pair),
            analysed: top.len(),
            ..Default::default()
        };
        for seg in &top {
            let high_a = scores_a[&seg.id] >= a_cut;
            let high_b = scores_b[&seg.id] >= b_cut;
            match (high_a, high_b) {
                (true, true) => b.both_high += 1,
                (true, false) => tally(&mut b.only_a, seg, config, vocab),
                (false, true) => tally(&mut b.only_b, seg, config, vocab),
                (false, false) => {}
            }
        }
        total.analysed += b.analysed;
        total.both_high += b.both_high;
        add(&mut total.only_a, &b.only_a);
        add(&mut total.only_b, &b.only_b);
        per_pair.push(b);
    }
    Ok(AnalysisReport {
        metric_a: metric_a.to_owned(),
        metric_b: metric_b.to_owned(),
        config: *config,
        per_pair,
        total,
    })
}
