//! Epsilon-insensitive support vector regression with an RBF kernel.
//!
//! Training solves the dual
//!
//! ```text
//! max  -1/2 sum_ij beta_i beta_j K_ij - eps sum_i |beta_i| + sum_i y_i beta_i
//! s.t. sum_i beta_i = 0,  -C <= beta_i <= C
//! ```
//!
//! with SMO ([`smo`]), and the model predicts `f(x) = sum_i beta_i K(sv_i, x) + b`.
//! [`check_kkt`] certifies a trained model against its training data, and
//! [`grid_search`] selects `(C, eps, gamma)` by k-fold cross validation.

mod grid;
mod io;
mod kernel;
mod kkt;
mod smo;

use std::fmt;

use thiserror::Error;

pub use grid::{grid_search, default_grid, product, CvObjective, CvResult, GridRow, DEFAULT_GRID_VALUES};
pub use kernel::{gram_matrix, rbf_kernel, SquaredDistances, FULL_CACHE_LIMIT};
pub use kkt::{check_kkt, KktReport};
pub use smo::DualSolution;

use kernel::{DirectRows, DistanceRows, KernelCache, RowSource};

/// Default KKT stopping tolerance.
pub const DEFAULT_TOL: f64 = 1e-3;
/// Default cap on SMO pair updates.
pub const DEFAULT_MAX_ITER: u64 = 10_000_000;

#[derive(Debug, Error)]
pub enum SvrError {
    #[error("invalid hyperparameters: {0}")]
    InvalidParams(String),
    #[error("training set is empty")]
    Empty,
    #[error("{x} feature vectors but {y} targets")]
    CountMismatch { x: usize, y: usize },
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimMismatch { expected: usize, found: usize },
    #[error("non-finite value in {0}")]
    NonFinite(String),
    #[error("SMO did not converge after {iterations} iterations (max KKT violation {max_violation:e})")]
    NotConverged { iterations: u64, max_violation: f64 },
    #[error("infeasible dual point: {0}")]
    Infeasible(String),
    #[error("grid search needs at least {k} points, got {n}")]
    TooFewPoints { n: usize, k: usize },
    #[error("empty hyperparameter grid")]
    EmptyGrid,
    #[error(transparent)]
    Folds(#[from] crate::corpus::CorpusError),
    #[error("bad model file: {0}")]
    Format(String),
    #[error("I/O error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T, E = SvrError> = std::result::Result<T, E>;

/// `C`, `epsilon` and `gamma` of an RBF epsilon-SVR.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Hyperparams {
    pub c: f64,
    pub epsilon: f64,
    pub gamma: f64,
}

impl Hyperparams {
    pub fn new(c: f64, epsilon: f64, gamma: f64) -> Result<Self> {
        let p = Self { c, epsilon, gamma };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.c > 0.0 && self.c.is_finite()) {
            return Err(SvrError::InvalidParams(format!("C must be > 0, got {}", self.c)));
        }
        if !(self.epsilon >= 0.0 && self.epsilon.is_finite()) {
            return Err(SvrError::InvalidParams(format!(
                "epsilon must be >= 0, got {}",
                self.epsilon
            )));
        }
        if !(self.gamma > 0.0 && self.gamma.is_finite()) {
            return Err(SvrError::InvalidParams(format!(
                "gamma must be > 0, got {}",
                self.gamma
            )));
        }
        Ok(())
    }
}

impl fmt::Display for Hyperparams {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "C={} epsilon={} gamma={}", self.c, self.epsilon, self.gamma)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    pub tol: f64,
    pub max_iter: u64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            tol: DEFAULT_TOL,
            max_iter: DEFAULT_MAX_ITER,
        }
    }
}

/// A trained model. Support vectors are kept in training order.
#[derive(Debug, Clone, PartialEq)]
pub struct SvrModel {
    dim: usize,
    support_vectors: Vec<Vec<f64>>,
    dual_coefs: Vec<f64>,
    bias: f64,
    params: Hyperparams,
}

impl SvrModel {
    /// A model without support vectors: predicts `bias` everywhere.
    pub fn constant(dim: usize, bias: f64, params: Hyperparams) -> Self {
        Self {
            dim,
            support_vectors: Vec::new(),
            dual_coefs: Vec::new(),
            bias,
            params,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn support_vectors(&self) -> &[Vec<f64>] {
        &self.support_vectors
    }

    pub fn dual_coefs(&self) -> &[f64] {
        &self.dual_coefs
    }

    pub fn bias(&self) -> f64 {
        self.bias
    }

    pub fn params(&self) -> &Hyperparams {
        &self.params
    }

    pub fn predict(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.dim {
            return Err(SvrError::DimMismatch {
                expected: self.dim,
                found: x.len(),
            });
        }
        Ok(self.predict_unchecked(x))
    }

    fn predict_unchecked(&self, x: &[f64]) -> f64 {
        let gamma = self.params.gamma;
        let sum: f64 = self
            .support_vectors
            .iter()
            .zip(&self.dual_coefs)
            .map(|(sv, beta)| beta * kernel::rbf_unchecked(sv, x, gamma))
            .sum();
        sum + self.bias
    }

    pub fn predict_batch<X: AsRef<[f64]>>(&self, xs: &[X]) -> Result<Vec<f64>> {
        xs.iter().map(|x| self.predict(x.as_ref())).collect()
    }
}

fn validate_inputs<X: AsRef<[f64]>>(x: &[X], y: &[f64], params: &Hyperparams) -> Result<usize> {
    params.validate()?;
    if x.len() != y.len() {
        return Err(SvrError::CountMismatch {
            x: x.len(),
            y: y.len(),
        });
    }
    let first = x.first().ok_or(SvrError::Empty)?;
    let dim = first.as_ref().len();
    for (i, xi) in x.iter().enumerate() {
        let xi = xi.as_ref();
        if xi.len() != dim {
            return Err(SvrError::DimMismatch {
                expected: dim,
                found: xi.len(),
            });
        }
        if xi.iter().any(|v| !v.is_finite()) {
            return Err(SvrError::NonFinite(format!("feature vector {i}")));
        }
    }
    if let Some(i) = y.iter().position(|v| !v.is_finite()) {
        return Err(SvrError::NonFinite(format!("target {i}")));
    }
    Ok(dim)
}

fn all_equal(y: &[f64]) -> bool {
    y.iter().all(|&v| v == y[0])
}

/// Solves the dual and returns one `beta` per training point.
///
/// A constant target vector returns all-zero `beta` with `bias = y[0]`
/// without running SMO.
pub fn solve_dual<X: AsRef<[f64]>>(
    x: &[X],
    y: &[f64],
    params: &Hyperparams,
    opts: &SolverOptions,
) -> Result<DualSolution> {
    validate_inputs(x, y, params)?;
    solve_with(
        KernelCache::new(DirectRows {
            x,
            gamma: params.gamma,
        }),
        y,
        params,
        opts,
    )
}

fn solve_with<S: RowSource>(
    mut cache: KernelCache<S>,
    y: &[f64],
    params: &Hyperparams,
    opts: &SolverOptions,
) -> Result<DualSolution> {
    if all_equal(y) {
        return Ok(DualSolution {
            betas: vec![0.0; y.len()],
            bias: y[0],
            iterations: 0,
            gap: 0.0,
        });
    }
    smo::solve(
        &mut cache,
        y,
        params.c,
        params.epsilon,
        opts.tol,
        opts.max_iter,
    )
}

fn build_model<X: AsRef<[f64]>>(
    x: &[X],
    dim: usize,
    solution: DualSolution,
    params: &Hyperparams,
) -> SvrModel {
    let (support_vectors, dual_coefs) = x
        .iter()
        .zip(solution.betas)
        .filter(|(_, b)| *b != 0.0)
        .map(|(xi, b)| (xi.as_ref().to_vec(), b))
        .unzip();
    SvrModel {
        dim,
        support_vectors,
        dual_coefs,
        bias: solution.bias,
        params: *params,
    }
}

/// Trains an RBF epsilon-SVR. Points with `beta == 0` are dropped from the model.
pub fn svr_train<X: AsRef<[f64]>>(
    x: &[X],
    y: &[f64],
    params: &Hyperparams,
    opts: &SolverOptions,
) -> Result<SvrModel> {
    let dim = validate_inputs(x, y, params)?;
    let solution = solve_dual(x, y, params, opts)?;
    Ok(build_model(x, dim, solution, params))
}

/// Training on the rows `idx` of `x`, reusing precomputed squared distances.
pub(crate) fn svr_train_subset<X: AsRef<[f64]>>(
    x: &[X],
    dist: &SquaredDistances,
    idx: &[usize],
    y: &[f64],
    params: &Hyperparams,
    opts: &SolverOptions,
) -> Result<SvrModel> {
    let rows: Vec<&[f64]> = idx.iter().map(|&i| x[i].as_ref()).collect();
    let dim = validate_inputs(&rows, y, params)?;
    let cache = KernelCache::new(DistanceRows {
        dist,
        idx,
        gamma: params.gamma,
    });
    let solution = solve_with(cache, y, params, opts)?;
    Ok(build_model(&rows, dim, solution, params))
}

pub fn svr_predict(model: &SvrModel, x: &[f64]) -> Result<f64> {
    model.predict(x)
}

/// Value of the dual objective at `betas`. Fails if `betas` is infeasible.
pub fn dual_objective<X: AsRef<[f64]>>(
    x: &[X],
    y: &[f64],
    params: &Hyperparams,
    betas: &[f64],
) -> Result<f64> {
    validate_inputs(x, y, params)?;
    if betas.len() != x.len() {
        return Err(SvrError::CountMismatch {
            x: x.len(),
            y: betas.len(),
        });
    }
    let c = params.c;
    if let Some((i, b)) = betas
        .iter()
        .enumerate()
        .find(|(_, b)| !(b.abs() <= c * (1.0 + 1e-12)))
    {
        return Err(SvrError::Infeasible(format!("|beta_{i}| = {} exceeds C = {c}", b.abs())));
    }
    let sum: f64 = betas.iter().sum();
    let scale: f64 = betas.iter().map(|b| b.abs()).sum::<f64>().max(1.0);
    if sum.abs() > 1e-9 * scale {
        return Err(SvrError::Infeasible(format!("sum of betas is {sum:e}")));
    }
    let mut quad = 0.0;
    for i in 0..x.len() {
        if betas[i] == 0.0 {
            continue;
        }
        for j in 0..x.len() {
            quad += betas[i]
                * betas[j]
                * kernel::rbf_unchecked(x[i].as_ref(), x[j].as_ref(), params.gamma);
        }
    }
    let l1: f64 = betas.iter().map(|b| b.abs()).sum();
    let lin: f64 = y.iter().zip(betas).map(|(a, b)| a * b).sum();
    Ok(-0.5 * quad - params.epsilon * l1 + lin)
}
