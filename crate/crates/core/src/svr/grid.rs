//! Hyperparameter selection by k-fold cross validation.

use std::fmt::Write as _;
use std::str::FromStr;

use rayon::prelude::*;

use super::kernel::{SquaredDistances, FULL_CACHE_LIMIT};
use super::{svr_train, svr_train_subset, Hyperparams, Result, SolverOptions, SvrError};
use crate::corpus::kfold_assign;
use crate::eval::pearson;

/// Values searched for each of `C`, `epsilon` and `gamma`.
pub const DEFAULT_GRID_VALUES: [f64; 4] = [0.01, 0.1, 1.0, 10.0];

/// All 64 combinations of [`DEFAULT_GRID_VALUES`], `C` outermost, then
/// `epsilon`, then `gamma`, each ascending.
pub fn default_grid() -> Vec<Hyperparams> {
    product(&DEFAULT_GRID_VALUES, &DEFAULT_GRID_VALUES, &DEFAULT_GRID_VALUES)
}

/// Cartesian product in `C`, `epsilon`, `gamma` nesting order.
pub fn product(cs: &[f64], epsilons: &[f64], gammas: &[f64]) -> Vec<Hyperparams> {
    let mut grid = Vec::with_capacity(cs.len() * epsilons.len() * gammas.len());
    for &c in cs {
        for &epsilon in epsilons {
            for &gamma in gammas {
                grid.push(Hyperparams { c, epsilon, gamma });
            }
        }
    }
    grid
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CvObjective {
    /// Pearson correlation between held-out predictions and targets.
    #[default]
    Pearson,
    /// Negative mean squared error on the held-out fold.
    NegMse,
}

impl FromStr for CvObjective {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "pearson" => Ok(Self::Pearson),
            "neg_mse" | "neg-mse" => Ok(Self::NegMse),
            other => Err(format!("unknown CV objective `{other}` (pearson|neg_mse)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridRow {
    pub params: Hyperparams,
    pub mean_score: f64,
    pub fold_scores: Vec<f64>,
    /// Folds scored 0 because their Pearson correlation was undefined.
    pub degenerate_folds: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CvResult {
    pub rows: Vec<GridRow>,
    pub best: Hyperparams,
    pub best_index: usize,
}

impl CvResult {
    pub fn best_row(&self) -> &GridRow {
        &self.rows[self.best_index]
    }

    /// One row per grid entry: `c epsilon gamma mean_score fold_1..fold_k degenerate_folds best`.
    /// A grid that was not cross-validated has mean score `-`.
    pub fn to_tsv(&self) -> String {
        let k = self.rows.first().map_or(0, |r| r.fold_scores.len());
        let mut out = String::from("c\tepsilon\tgamma\tmean_score");
        for f in 1..=k {
            let _ = write!(out, "\tfold_{f}");
        }
        out.push_str("\tdegenerate_folds\tbest\n");
        for (i, row) in self.rows.iter().enumerate() {
            let p = &row.params;
            let _ = write!(out, "{}\t{}\t{}\t", p.c, p.epsilon, p.gamma);
            if row.mean_score.is_nan() {
                out.push('-');
            } else {
                let _ = write!(out, "{}", row.mean_score);
            }
            for s in &row.fold_scores {
                let _ = write!(out, "\t{s}");
            }
            let degenerate: Vec<String> =
                row.degenerate_folds.iter().map(|f| (f + 1).to_string()).collect();
            let degenerate = if degenerate.is_empty() {
                "-".to_string()
            } else {
                degenerate.join(",")
            };
            let _ = writeln!(out, "\t{degenerate}\t{}", u8::from(i == self.best_index));
        }
        out
    }
}

fn fold_score(objective: CvObjective, predicted: &[f64], actual: &[f64]) -> (f64, bool) {
    match objective {
        CvObjective::Pearson => {
            let constant = |v: &[f64]| v.iter().all(|&a| a == v[0]);
            if predicted.len() < 2 || constant(predicted) || constant(actual) {
                return (0.0, true);
            }
            match pearson(predicted, actual) {
                Ok(p) => (p.r, p.degenerate),
                Err(_) => (0.0, true),
            }
        }
        CvObjective::NegMse => {
            let mse = predicted
                .iter()
                .zip(actual)
                .map(|(p, a)| (p - a) * (p - a))
                .sum::<f64>()
                / actual.len().max(1) as f64;
            (-mse, false)
        }
    }
}

/// Scores every grid entry by k-fold cross validation and picks the best.
///
/// Folds come from [`kfold_assign`]`(n, k, seed)`. The `(entry, fold)` cells
/// run on the current rayon pool and are reduced in grid order, so the result
/// does not depend on the number of threads. Ties go to the earliest entry.
pub fn grid_search<X: AsRef<[f64]> + Sync>(
    x: &[X],
    y: &[f64],
    grid: &[Hyperparams],
    k: usize,
    seed: u64,
    objective: CvObjective,
    opts: &SolverOptions,
) -> Result<CvResult> {
    if grid.is_empty() {
        return Err(SvrError::EmptyGrid);
    }
    for p in grid {
        p.validate()?;
    }
    if x.len() != y.len() {
        return Err(SvrError::CountMismatch {
            x: x.len(),
            y: y.len(),
        });
    }
    if x.len() < k {
        return Err(SvrError::TooFewPoints { n: x.len(), k });
    }
    let folds = kfold_assign(x.len(), k, seed)?;
    let splits: Vec<(Vec<usize>, Vec<usize>)> = (0..k)
        .map(|f| {
            let (test, train): (Vec<usize>, Vec<usize>) =
                (0..x.len()).partition(|&i| folds[i] == f);
            (train, test)
        })
        .collect();
    let dist = (x.len() <= FULL_CACHE_LIMIT).then(|| SquaredDistances::compute(x));

    let cells: Vec<(usize, usize)> = (0..grid.len())
        .flat_map(|g| (0..k).map(move |f| (g, f)))
        .collect();
    let scored: Vec<(f64, bool)> = cells
        .par_iter()
        .map(|&(g, f)| {
            let params = &grid[g];
            let (train, test) = &splits[f];
            let y_train: Vec<f64> = train.iter().map(|&i| y[i]).collect();
            let model = match &dist {
                Some(dist) => svr_train_subset(x, dist, train, &y_train, params, opts)?,
                None => {
                    let x_train: Vec<&[f64]> = train.iter().map(|&i| x[i].as_ref()).collect();
                    svr_train(&x_train, &y_train, params, opts)?
                }
            };
            let predicted = test
                .iter()
                .map(|&i| model.predict(x[i].as_ref()))
                .collect::<Result<Vec<f64>>>()?;
            let actual: Vec<f64> = test.iter().map(|&i| y[i]).collect();
            Ok(fold_score(objective, &predicted, &actual))
        })
        .collect::<Result<Vec<_>>>()?;

    let mut rows = Vec::with_capacity(grid.len());
    let mut degenerate_entries = 0;
    for (g, params) in grid.iter().enumerate() {
        let cell = &scored[g * k..(g + 1) * k];
        let fold_scores: Vec<f64> = cell.iter().map(|(s, _)| *s).collect();
        let degenerate_folds: Vec<usize> = cell
            .iter()
            .enumerate()
            .filter(|(_, (_, d))| *d)
            .map(|(f, _)| f)
            .collect();
        if !degenerate_folds.is_empty() {
            degenerate_entries += 1;
        }
        let mean_score = fold_scores.iter().sum::<f64>() / k as f64;
        rows.push(GridRow {
            params: *params,
            mean_score,
            fold_scores,
            degenerate_folds,
        });
    }
    if degenerate_entries > 0 {
        log::warn!(
            "{degenerate_entries} of {} grid entries had folds with constant predictions or targets; those folds were scored 0",
            grid.len()
        );
    }
    let best_index = rows
        .iter()
        .enumerate()
        .fold(0, |best, (i, r)| {
            if r.mean_score > rows[best].mean_score {
                i
            } else {
                best
            }
        });
    Ok(CvResult {
        best: rows[best_index].params,
        best_index,
        rows,
    })
}
