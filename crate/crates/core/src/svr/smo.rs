//! Sequential minimal optimization for the epsilon-SVR dual.
//!
//! The dual over `beta = alpha - alpha*` is split into `2n` box-constrained
//! variables `a = (alpha, alpha*)` with labels `s = (+1.., -1..)`:
//!
//! ```text
//! min  1/2 a^T Q a + p^T a    s.t.  s^T a = 0,  0 <= a_t <= C
//! Q_tu = s_t s_u K(x_t, x_u),  p = (eps - y, eps + y)
//! ```
//!
//! Each step picks the maximal violating pair and solves the two-variable
//! subproblem in closed form, which keeps `s^T a` (that is, `sum beta`) fixed.

use super::kernel::{KernelCache, RowSource};
use super::{Result, SvrError};

/// Curvature used when the two-variable subproblem is flat.
const TAU: f64 = 1e-12;

#[derive(Debug, Clone)]
pub struct DualSolution {
    /// `beta_i = alpha_i - alpha*_i`, one per training point.
    pub betas: Vec<f64>,
    pub bias: f64,
    pub iterations: u64,
    /// Final maximal KKT gap `m(a) - M(a)`.
    pub gap: f64,
}

pub(crate) fn solve<S: RowSource>(
    kernel: &mut KernelCache<S>,
    y: &[f64],
    c: f64,
    epsilon: f64,
    tol: f64,
    max_iter: u64,
) -> Result<DualSolution> {
    let n = y.len();
    let l = 2 * n;
    let sign = |t: usize| if t < n { 1.0 } else { -1.0 };
    let point = |t: usize| if t < n { t } else { t - n };

    let mut alpha = vec![0.0f64; l];
    // gradient of the objective; alpha = 0 so it starts at p
    let mut grad: Vec<f64> = (0..l)
        .map(|t| {
            if t < n {
                epsilon - y[t]
            } else {
                epsilon + y[t - n]
            }
        })
        .collect();

    let mut iterations = 0u64;
    loop {
        // i: max over I_up of -s_t g_t; j: max over I_low of s_t g_t
        let mut g_up = f64::NEG_INFINITY;
        let mut g_low = f64::NEG_INFINITY;
        let (mut i, mut j) = (usize::MAX, usize::MAX);
        for t in 0..l {
            let (s, a, g) = (sign(t), alpha[t], grad[t]);
            let up = if s > 0.0 { a < c } else { a > 0.0 };
            let low = if s > 0.0 { a > 0.0 } else { a < c };
            if up && -s * g > g_up {
                g_up = -s * g;
                i = t;
            }
            if low && s * g > g_low {
                g_low = s * g;
                j = t;
            }
        }
        let gap = g_up + g_low;
        if gap < tol || i == usize::MAX || j == usize::MAX {
            let gap = gap.max(0.0);
            let betas = (0..n).map(|k| alpha[k] - alpha[k + n]).collect();
            let bias = -rho(&alpha, &grad, c, n);
            return Ok(DualSolution {
                betas,
                bias,
                iterations,
                gap: if gap.is_finite() { gap } else { 0.0 },
            });
        }
        if iterations >= max_iter {
            return Err(SvrError::NotConverged {
                iterations,
                max_violation: gap,
            });
        }
        iterations += 1;

        let row_i = kernel.row(point(i));
        let row_j = kernel.row(point(j));
        let (si, sj) = (sign(i), sign(j));
        let q_ii = row_i[point(i)];
        let q_jj = row_j[point(j)];
        let q_ij = si * sj * row_i[point(j)];
        let (old_i, old_j) = (alpha[i], alpha[j]);

        if si != sj {
            let mut quad = q_ii + q_jj + 2.0 * q_ij;
            if quad <= 0.0 {
                quad = TAU;
            }
            let delta = (-grad[i] - grad[j]) / quad;
            let diff = alpha[i] - alpha[j];
            alpha[i] += delta;
            alpha[j] += delta;
            if diff > 0.0 {
                if alpha[j] < 0.0 {
                    alpha[j] = 0.0;
                    alpha[i] = diff;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = -diff;
            }
            // equal upper bounds on both sides
            if diff > 0.0 {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = c - diff;
                }
            } else if alpha[j] > c {
                alpha[j] = c;
                alpha[i] = c + diff;
            }
        } else {
            let mut quad = q_ii + q_jj - 2.0 * q_ij;
            if quad <= 0.0 {
                quad = TAU;
            }
            let delta = (grad[i] - grad[j]) / quad;
            let sum = alpha[i] + alpha[j];
            alpha[i] -= delta;
            alpha[j] += delta;
            if sum > c {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = sum - c;
                }
            } else if alpha[j] < 0.0 {
                alpha[j] = 0.0;
                alpha[i] = sum;
            }
            if sum > c {
                if alpha[j] > c {
                    alpha[j] = c;
                    alpha[i] = sum - c;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = sum;
            }
        }

        let d_i = alpha[i] - old_i;
        let d_j = alpha[j] - old_j;
        let (ci, cj) = (si * d_i, sj * d_j);
        let (g_pos, g_neg) = grad.split_at_mut(n);
        for k in 0..n {
            let change = ci * row_i[k] + cj * row_j[k];
            g_pos[k] += change;
            g_neg[k] -= change;
        }
    }
}

/// Offset `rho = -b`: the mean of `s_t g_t` over free variables, or the
/// midpoint of the feasible interval when every variable sits at a bound.
fn rho(alpha: &[f64], grad: &[f64], c: f64, n: usize) -> f64 {
    let mut ub = f64::INFINITY;
    let mut lb = f64::NEG_INFINITY;
    let mut free_sum = 0.0;
    let mut free = 0usize;
    for (t, (&a, &g)) in alpha.iter().zip(grad).enumerate() {
        let s = if t < n { 1.0 } else { -1.0 };
        let yg = s * g;
        if a >= c {
            if s < 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else if a <= 0.0 {
            if s > 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else {
            free += 1;
            free_sum += yg;
        }
    }
    if free > 0 {
        free_sum / free as f64
    } else {
        (ub + lb) / 2.0
    }
}
