//! DA-scored segment corpora: TSV parsing, validation, and the train/test
//! splits used for model selection and evaluation.
//!
//! The on-disk format is a strict tab-separated file with the header
//!
//! ```text
//! pair	dataset	system	seg_id	hypothesis	reference	da_score
//! ```
//!
//! Text fields may not contain tabs or newlines. Rows are kept in file order.

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_pcg::Pcg64;
use thiserror::Error;

pub const HEADER: &str = "pair\tdataset\tsystem\tseg_id\thypothesis\treference\tda_score";
const COLUMNS: usize = 7;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("duplicate segment id `{id}` (line {line})")]
    DuplicateId { id: String, line: usize },
    #[error("invalid language pair `{0}`")]
    InvalidPair(String),
    #[error("invalid segment `{id}`: {message}")]
    InvalidSegment { id: String, message: String },
    #[error("no segments for {pair} in dataset `{dataset}`")]
    EmptyTestSet { pair: LanguagePair, dataset: String },
    #[error("k-fold assignment needs 2 <= k <= n (got n={n}, k={k})")]
    InvalidFolds { n: usize, k: usize },
    #[error("I/O error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T, E = CorpusError> = std::result::Result<T, E>;

/// A `src-tgt` translation direction such as `cs-en`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct LanguagePair {
    source: String,
    target: String,
}

fn valid_code(code: &str) -> bool {
    (2..=3).contains(&code.len()) && code.bytes().all(|b| b.is_ascii_lowercase())
}

impl LanguagePair {
    pub fn new(source: &str, target: &str) -> Result<Self> {
        if !valid_code(source) || !valid_code(target) || source == target {
            return Err(CorpusError::InvalidPair(format!("{source}-{target}")));
        }
        Ok(Self {
            source: source.to_owned(),
            target: target.to_owned(),
        })
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    pub fn target(&self) -> &str {
        &self.target
    }
}

impl FromStr for LanguagePair {
    type Err = CorpusError;

    fn from_str(s: &str) -> Result<Self> {
        match s.split_once('-') {
            Some((src, tgt)) => {
                LanguagePair::new(src, tgt).map_err(|_| CorpusError::InvalidPair(s.to_owned()))
            }
            None => Err(CorpusError::InvalidPair(s.to_owned())),
        }
    }
}

impl fmt::Display for LanguagePair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}-{}", self.source, self.target)
    }
}

/// One scored MT hypothesis with its reference translation.
#[derive(Debug, Clone, PartialEq)]
pub struct Segment {
    pub id: String,
    pub pair: LanguagePair,
    pub dataset: String,
    pub system: String,
    pub hypothesis: String,
    pub reference: String,
    pub da_score: f64,
}

impl Segment {
    /// Default id for rows that do not carry one: `<dataset>/<pair>/<system>/<line-no>`.
    pub fn default_id(dataset: &str, pair: &LanguagePair, system: &str, line: usize) -> String {
        format!("{dataset}/{pair}/{system}/{line}")
    }

    fn validate(&self) -> std::result::Result<(), String> {
        if self.hypothesis.trim().is_empty() {
            return Err("empty hypothesis".into());
        }
        if self.reference.trim().is_empty() {
            return Err("empty reference".into());
        }
        if !self.da_score.is_finite() {
            return Err(format!("non-finite DA score {}", self.da_score));
        }
        for (name, field) in [
            ("id", &self.id),
            ("dataset", &self.dataset),
            ("system", &self.system),
            ("hypothesis", &self.hypothesis),
            ("reference", &self.reference),
        ] {
            if field.contains(['\t', '\n', '\r']) {
                return Err(format!("{name} contains a tab or line break"));
            }
        }
        Ok(())
    }
}

/// An ordered, id-unique collection of segments.
#[derive(Debug, Clone, Default)]
pub struct DACorpus {
    segments: Vec<Segment>,
    index: HashMap<String, usize>,
}

impl DACorpus {
    /// Builds a corpus, validating every segment and id uniqueness.
    pub fn new(segments: Vec<Segment>) -> Result<Self> {
        let mut index = HashMap::with_capacity(segments.len());
        for (pos, seg) in segments.iter().enumerate() {
            seg.validate().map_err(|message| CorpusError::InvalidSegment {
                id: seg.id.clone(),
                message,
            })?;
            if index.insert(seg.id.clone(), pos).is_some() {
                return Err(CorpusError::DuplicateId {
                    id: seg.id.clone(),
                    line: pos + 2,
                });
            }
        }
        Ok(Self { segments, index })
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    pub fn len(&self) -> usize {
        self.segments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.segments.is_empty()
    }

    pub fn get(&self, id: &str) -> Option<&Segment> {
        self.index.get(id).map(|&i| &self.segments[i])
    }

    pub fn iter(&self) -> impl Iterator<Item = &Segment> {
        self.segments.iter()
    }

    /// Distinct language pairs in order of first appearance.
    pub fn pairs(&self) -> Vec<LanguagePair> {
        let mut seen = HashSet::new();
        self.segments
            .iter()
            .filter(|s| seen.insert(&s.pair))
            .map(|s| s.pair.clone())
            .collect()
    }

    /// Number of segments per (dataset, pair), in first-appearance order.
    pub fn counts(&self) -> Vec<((String, LanguagePair), usize)> {
        let mut order: Vec<(String, LanguagePair)> = Vec::new();
        let mut counts: HashMap<(String, LanguagePair), usize> = HashMap::new();
        for s in &self.segments {
            let key = (s.dataset.clone(), s.pair.clone());
            let c = counts.entry(key.clone()).or_insert(0);
            if *c == 0 {
                order.push(key);
            }
            *c += 1;
        }
        order
            .into_iter()
            .map(|k| {
                let c = counts[&k];
                (k, c)
            })
            .collect()
    }

    /// Sub-corpus with the given ids, in the order given.
    pub fn subset(&self, ids: &[String]) -> Result<DACorpus> {
        let segments = ids
            .iter()
            .map(|id| {
                self.get(id).cloned().ok_or_else(|| CorpusError::InvalidSegment {
                    id: id.clone(),
                    message: "not in corpus".into(),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        DACorpus::new(segments)
    }
}

impl<'a> IntoIterator for &'a DACorpus {
    type Item = &'a Segment;
    type IntoIter = std::slice::Iter<'a, Segment>;

    fn into_iter(self) -> Self::IntoIter {
        self.segments.iter()
    }
}

fn parse_row(line_no: usize, line: &str) -> Result<Segment> {
    let err = |message: String| CorpusError::Parse {
        line: line_no,
        message,
    };
    let fields: Vec<&str> = line.split('\t').collect();
    if fields.len() != COLUMNS {
        return Err(err(format!(
            "expected {COLUMNS} tab-separated columns, found {}",
            fields.len()
        )));
    }
    let pair: LanguagePair = fields[0]
        .parse()
        .map_err(|_| err(format!("invalid language pair `{}`", fields[0])))?;
    let da_score: f64 = fields[6]
        .parse()
        .map_err(|_| err(format!("DA score `{}` is not a number", fields[6])))?;
    if !da_score.is_finite() {
        return Err(err(format!("DA score `{}` is not finite", fields[6])));
    }
    let dataset = fields[1].to_owned();
    let system = fields[2].to_owned();
    let id = if fields[3].is_empty() {
        Segment::default_id(&dataset, &pair, &system, line_no)
    } else {
        fields[3].to_owned()
    };
    let seg = Segment {
        id,
        pair,
        dataset,
        system,
        hypothesis: fields[4].to_owned(),
        reference: fields[5].to_owned(),
        da_score,
    };
    seg.validate().map_err(err)?;
    Ok(seg)
}

/// Parses corpus TSV text. Line numbers in errors are 1-based and count the header.
pub fn parse_corpus_str(text: &str) -> Result<DACorpus> {
    let body = text.strip_suffix('\n').unwrap_or(text);
    let mut lines = body.split('\n').enumerate();
    match lines.next() {
        Some((_, h)) if h == HEADER => {}
        Some((_, h)) => {
            return Err(CorpusError::Parse {
                line: 1,
                message: format!("unexpected header `{h}`"),
            })
        }
        None => unreachable!("split yields at least one item"),
    }
    let mut segments = Vec::new();
    let mut index = HashMap::new();
    for (i, line) in lines {
        let line_no = i + 1;
        if line.is_empty() {
            return Err(CorpusError::Parse {
                line: line_no,
                message: "empty line".into(),
            });
        }
        let seg = parse_row(line_no, line)?;
        if index.insert(seg.id.clone(), segments.len()).is_some() {
            return Err(CorpusError::DuplicateId {
                id: seg.id,
                line: line_no,
            });
        }
        segments.push(seg);
    }
    Ok(DACorpus { segments, index })
}

pub fn parse_corpus(path: impl AsRef<Path>) -> Result<DACorpus> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| CorpusError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_corpus_str(&text)
}

/// Serializes a corpus in the TSV format accepted by [`parse_corpus`].
pub fn write_corpus_to<W: Write>(corpus: &DACorpus, mut out: W) -> std::io::Result<()> {
    writeln!(out, "{HEADER}")?;
    for s in corpus {
        writeln!(
            out,
            "{}\t{}\t{}\t{}\t{}\t{}\t{}",
            s.pair, s.dataset, s.system, s.id, s.hypothesis, s.reference, s.da_score
        )?;
    }
    Ok(())
}

pub fn write_corpus(corpus: &DACorpus, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let io_err = |source| CorpusError::Io {
        path: path.display().to_string(),
        source,
    };
    let file = std::fs::File::create(path).map_err(io_err)?;
    let mut w = std::io::BufWriter::new(file);
    write_corpus_to(corpus, &mut w).map_err(io_err)?;
    w.flush().map_err(io_err)
}

/// Segment ids of a train/test split.
#[derive(Debug, Clone, PartialEq)]
pub struct SplitSpec {
    pub target_pair: LanguagePair,
    pub test_dataset: String,
    pub train_ids: Vec<String>,
    pub test_ids: Vec<String>,
}

/// Holds out every `(target_pair, test_dataset)` segment and trains on all the rest.
///
/// Rows of the target pair from other datasets stay in the training set: with
/// WMT-2015 (4 pairs x 500) and WMT-2016 (6 pairs x 560) this gives 4,800
/// training and 560 test segments for every WMT-2016 pair.
pub fn leave_one_pair_out_split(
    corpus: &DACorpus,
    target_pair: &LanguagePair,
    test_dataset: &str,
) -> Result<SplitSpec> {
    let (test, train): (Vec<&Segment>, Vec<&Segment>) = corpus
        .iter()
        .partition(|s| &s.pair == target_pair && s.dataset == test_dataset);
    if test.is_empty() {
        return Err(CorpusError::EmptyTestSet {
            pair: target_pair.clone(),
            dataset: test_dataset.to_owned(),
        });
    }
    Ok(SplitSpec {
        target_pair: target_pair.clone(),
        test_dataset: test_dataset.to_owned(),
        train_ids: train.into_iter().map(|s| s.id.clone()).collect(),
        test_ids: test.into_iter().map(|s| s.id.clone()).collect(),
    })
}

/// Deterministic balanced fold assignment.
///
/// Indices `0..n` are shuffled by a Fisher-Yates pass driven by PCG-XSL-RR
/// 128/64 (`rand_pcg::Pcg64`, seeded with `seed_from_u64(seed)`): for `i`
/// from `n-1` down to `1`, swap `i` with `next_u64() % (i + 1)`. The element
/// at shuffled position `p` gets fold `p % k`, so fold sizes differ by at most one.
pub fn kfold_assign(n: usize, k: usize, seed: u64) -> Result<Vec<usize>> {
    if k < 2 || k > n {
        return Err(CorpusError::InvalidFolds { n, k });
    }
    let mut rng = Pcg64::seed_from_u64(seed);
    let mut order: Vec<usize> = (0..n).collect();
    for i in (1..n).rev() {
        let j = (rng.next_u64() % (i as u64 + 1)) as usize;
        order.swap(i, j);
    }
    let mut folds = vec![0; n];
    for (pos, &idx) in order.iter().enumerate() {
        folds[idx] = pos % k;
    }
    Ok(folds)
}
