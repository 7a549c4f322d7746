//! Standalone optimality certificate for a trained model.

use std::collections::{HashMap, VecDeque};

use super::{Result, SvrError, SvrModel};

#[derive(Debug, Clone, PartialEq)]
pub struct KktReport {
    /// Largest violation over all training points.
    pub max_violation: f64,
    /// Training point with the largest violation, if any point violates.
    pub worst_point: Option<usize>,
    /// `|sum beta|`.
    pub equality_residual: f64,
    pub passed: bool,
}

fn key(x: &[f64]) -> Vec<u64> {
    x.iter().map(|v| v.to_bits()).collect()
}

/// Checks the epsilon-SVR KKT conditions of `model` on its training data.
///
/// With `e_i = f(x_i) - y_i`:
/// - `beta_i = 0`: `|e_i| <= eps`
/// - `0 < beta_i < C`: `e_i = -eps`; `-C < beta_i < 0`: `e_i = +eps`
/// - `beta_i = C`: `e_i <= -eps`; `beta_i = -C`: `e_i >= eps`
///
/// each within `tol`, plus `|beta_i| <= C` and `sum beta = 0`. Support vectors
/// are matched to training rows by exact value, in training order.
pub fn check_kkt<X: AsRef<[f64]>>(
    model: &SvrModel,
    x: &[X],
    y: &[f64],
    tol: f64,
) -> Result<KktReport> {
    if x.len() != y.len() {
        return Err(SvrError::CountMismatch {
            x: x.len(),
            y: y.len(),
        });
    }
    let mut pending: HashMap<Vec<u64>, VecDeque<f64>> = HashMap::new();
    for (sv, &b) in model.support_vectors().iter().zip(model.dual_coefs()) {
        pending.entry(key(sv)).or_default().push_back(b);
    }

    let p = model.params();
    let (c, eps) = (p.c, p.epsilon);
    let at_bound = |b: f64| (b.abs() - c).abs() <= 1e-12 * c;

    let mut max_violation = 0.0f64;
    let mut worst_point = None;
    let mut sum = 0.0;
    let mut bound_excess = 0.0f64;
    for (i, (xi, &yi)) in x.iter().zip(y).enumerate() {
        let xi = xi.as_ref();
        let beta = pending
            .get_mut(&key(xi))
            .and_then(VecDeque::pop_front)
            .unwrap_or(0.0);
        sum += beta;
        bound_excess = bound_excess.max(beta.abs() - c);
        let e = model.predict(xi)? - yi;
        let violation = if beta == 0.0 {
            (e.abs() - eps).max(0.0)
        } else if at_bound(beta) {
            if beta > 0.0 {
                (e + eps).max(0.0)
            } else {
                (eps - e).max(0.0)
            }
        } else if beta > 0.0 {
            (e + eps).abs()
        } else {
            (e - eps).abs()
        };
        if violation > max_violation {
            max_violation = violation;
            worst_point = Some(i);
        }
    }
    let unmatched = pending.values().map(VecDeque::len).sum::<usize>();
    if unmatched > 0 {
        return Err(SvrError::Infeasible(format!(
            "{unmatched} support vectors are not training points"
        )));
    }
    let scale = model
        .dual_coefs()
        .iter()
        .map(|b| b.abs())
        .sum::<f64>()
        .max(1.0);
    let equality_residual = sum.abs();
    let passed = max_violation <= tol
        && equality_residual <= 1e-9 * scale
        && bound_excess <= 1e-12 * c;
    Ok(KktReport {
        max_violation,
        worst_point,
        equality_residual,
        passed,
    })
}
