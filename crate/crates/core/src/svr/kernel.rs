//! RBF kernel and the row caches used by the solver.

use std::num::NonZeroUsize;
use std::sync::Arc;

use lru::LruCache;
use rayon::prelude::*;

use super::{Result, SvrError};

/// Training sets up to this size get every kernel row cached.
pub const FULL_CACHE_LIMIT: usize = 8_000;

/// Memory budget for the row-wise LRU cache used above [`FULL_CACHE_LIMIT`].
const LRU_BUDGET_BYTES: usize = 512 << 20;

#[inline]
pub(crate) fn squared_distance(x: &[f64], y: &[f64]) -> f64 {
    x.iter()
        .zip(y)
        .map(|(a, b)| {
            let d = a - b;
            d * d
        })
        .sum()
}

/// `exp(-gamma * ||x - y||^2)`.
pub fn rbf_kernel(x: &[f64], y: &[f64], gamma: f64) -> Result<f64> {
    if x.len() != y.len() {
        return Err(SvrError::DimMismatch {
            expected: x.len(),
            found: y.len(),
        });
    }
    Ok(rbf_unchecked(x, y, gamma))
}

#[inline]
pub(crate) fn rbf_unchecked(x: &[f64], y: &[f64], gamma: f64) -> f64 {
    (-gamma * squared_distance(x, y)).exp()
}

/// Dense Gram matrix, row-major.
pub fn gram_matrix<X: AsRef<[f64]>>(x: &[X], gamma: f64) -> Vec<Vec<f64>> {
    (0..x.len())
        .map(|i| {
            (0..x.len())
                .map(|j| rbf_unchecked(x[i].as_ref(), x[j].as_ref(), gamma))
                .collect()
        })
        .collect()
}

/// Pairwise squared Euclidean distances, shared between trainings that only
/// differ in `gamma` or in which rows they use.
#[derive(Debug, Clone)]
pub struct SquaredDistances {
    n: usize,
    values: Vec<f64>,
}

impl SquaredDistances {
    /// Computes all pairs; rows are filled in parallel on the current rayon pool.
    pub fn compute<X: AsRef<[f64]> + Sync>(x: &[X]) -> Self {
        let n = x.len();
        let mut values = vec![0.0; n * n];
        values
            .par_chunks_mut(n.max(1))
            .enumerate()
            .for_each(|(i, row)| {
                for (j, v) in row.iter_mut().enumerate() {
                    *v = squared_distance(x[i].as_ref(), x[j].as_ref());
                }
            });
        Self { n, values }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.n + j]
    }
}

/// Produces one kernel row over the training points.
pub(crate) trait RowSource {
    fn len(&self) -> usize;
    fn compute_row(&self, i: usize) -> Vec<f64>;
}

pub(crate) struct DirectRows<'a, X> {
    pub x: &'a [X],
    pub gamma: f64,
}

impl<X: AsRef<[f64]>> RowSource for DirectRows<'_, X> {
    fn len(&self) -> usize {
        self.x.len()
    }

    fn compute_row(&self, i: usize) -> Vec<f64> {
        let xi = self.x[i].as_ref();
        self.x
            .iter()
            .map(|xj| rbf_unchecked(xi, xj.as_ref(), self.gamma))
            .collect()
    }
}

/// Rows of the subset `idx` of a precomputed distance matrix.
pub(crate) struct DistanceRows<'a> {
    pub dist: &'a SquaredDistances,
    pub idx: &'a [usize],
    pub gamma: f64,
}

impl RowSource for DistanceRows<'_> {
    fn len(&self) -> usize {
        self.idx.len()
    }

    fn compute_row(&self, i: usize) -> Vec<f64> {
        let gi = self.idx[i];
        self.idx
            .iter()
            .map(|&gj| (-self.gamma * self.dist.get(gi, gj)).exp())
            .collect()
    }
}

enum Policy {
    Full(Vec<Option<Arc<[f64]>>>),
    Lru(LruCache<usize, Arc<[f64]>>),
}

/// Kernel rows computed on first use. Every row is kept when the problem is
/// at most [`FULL_CACHE_LIMIT`] points; otherwise the least recently used
/// rows are evicted once the memory budget is reached.
pub(crate) struct KernelCache<S> {
    source: S,
    policy: Policy,
}

impl<S: RowSource> KernelCache<S> {
    pub fn new(source: S) -> Self {
        let n = source.len();
        let policy = if n <= FULL_CACHE_LIMIT {
            Policy::Full(vec![None; n])
        } else {
            let rows = (LRU_BUDGET_BYTES / (8 * n)).max(2);
            Policy::Lru(LruCache::new(NonZeroUsize::new(rows).unwrap()))
        };
        Self { source, policy }
    }

    #[cfg(test)]
    fn with_lru(source: S, rows: usize) -> Self {
        Self {
            source,
            policy: Policy::Lru(LruCache::new(NonZeroUsize::new(rows.max(1)).unwrap())),
        }
    }

    pub fn row(&mut self, i: usize) -> Arc<[f64]> {
        match &mut self.policy {
            Policy::Full(rows) => rows[i]
                .get_or_insert_with(|| self.source.compute_row(i).into())
                .clone(),
            Policy::Lru(cache) => cache
                .get_or_insert(i, || self.source.compute_row(i).into())
                .clone(),
        }
    }
}
