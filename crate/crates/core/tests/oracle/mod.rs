//! Reference computations that share no code with the library.

#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};

pub fn rbf(a: &[f64], b: &[f64], gamma: f64) -> f64 {
    let d2: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
    (-gamma * d2).exp()
}

pub fn kernel(x: &[Vec<f64>], gamma: f64) -> DMatrix<f64> {
    DMatrix::from_fn(x.len(), x.len(), |i, j| rbf(&x[i], &x[j], gamma))
}

/// Maximization form: `y.b - eps * |b|_1 - b'Kb / 2`.
pub fn dual_value(k: &DMatrix<f64>, y: &[f64], eps: f64, beta: &[f64]) -> f64 {
    let b = DVector::from_column_slice(beta);
    let quad = (b.transpose() * k * &b)[(0, 0)];
    let lin: f64 = y.iter().zip(beta).map(|(a, c)| a * c).sum();
    let l1: f64 = beta.iter().map(|v| v.abs()).sum();
    lin - eps * l1 - 0.5 * quad
}

#[derive(Debug, Clone)]
pub struct OracleSolution {
    pub beta: Vec<f64>,
    pub bias: f64,
    pub objective: f64,
    pub polished: bool,
}

/// Euclidean projection onto `{z in [0, C]^2n : sum(z[..n]) = sum(z[n..])}`.
fn project(v: &[f64], n: usize, c: f64) -> Vec<f64> {
    let clipped = |lambda: f64| -> (Vec<f64>, f64) {
        let z: Vec<f64> = v
            .iter()
            .enumerate()
            .map(|(i, &vi)| {
                let a = if i < n { 1.0 } else { -1.0 };
                (vi - lambda * a).clamp(0.0, c)
            })
            .collect();
        let s = z[..n].iter().sum::<f64>() - z[n..].iter().sum::<f64>();
        (z, s)
    };
    let span = v.iter().fold(0.0f64, |m, a| m.max(a.abs())) + c + 1.0;
    let (mut lo, mut hi) = (-span, span);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if clipped(mid).1 > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    clipped(0.5 * (lo + hi)).0
}

fn gradient(k: &DMatrix<f64>, y: &[f64], eps: f64, z: &[f64]) -> Vec<f64> {
    let n = y.len();
    let beta = DVector::from_fn(n, |i, _| z[i] - z[n + i]);
    let kb = k * beta;
    let mut g = vec![0.0; 2 * n];
    for i in 0..n {
        g[i] = kb[i] + eps - y[i];
        g[n + i] = -kb[i] + eps + y[i];
    }
    g
}

/// Interval of biases consistent with the optimality conditions.
fn bias_interval(k: &DMatrix<f64>, y: &[f64], eps: f64, c: f64, beta: &[f64]) -> (f64, f64) {
    let n = y.len();
    let b = DVector::from_column_slice(beta);
    let kb = k * b;
    let (mut lo, mut hi) = (f64::NEG_INFINITY, f64::INFINITY);
    for i in 0..n {
        let g = y[i] - kb[i];
        let at_upper = beta[i] >= c * (1.0 - 1e-12);
        let at_lower = beta[i] <= -c * (1.0 - 1e-12);
        if at_upper {
            hi = hi.min(g - eps);
        } else if at_lower {
            lo = lo.max(g + eps);
        } else if beta[i] == 0.0 {
            lo = lo.max(g - eps);
            hi = hi.min(g + eps);
        } else {
            let v = g - eps * beta[i].signum();
            lo = lo.max(v);
            hi = hi.min(v);
        }
    }
    (lo, hi)
}

/// Solves the free-set linear system for a guessed active pattern and
/// accepts the result only if every optimality condition holds.
fn polish(k: &DMatrix<f64>, y: &[f64], eps: f64, c: f64, guess: &[f64]) -> Option<(Vec<f64>, f64)> {
    let n = y.len();
    let snap = 1e-7 * c;
    let mut beta = vec![0.0; n];
    let mut free = Vec::new();
    for i in 0..n {
        if guess[i] >= c - snap {
            beta[i] = c;
        } else if guess[i] <= -c + snap {
            beta[i] = -c;
        } else if guess[i].abs() > snap {
            free.push(i);
        }
    }
    let bias;
    if free.is_empty() {
        if beta.iter().sum::<f64>().abs() > 1e-12 * c * n as f64 {
            return None;
        }
        let (lo, hi) = bias_interval(k, y, eps, c, &beta);
        if lo > hi + 1e-9 {
            return None;
        }
        bias = 0.5 * (lo + hi);
    } else {
        let m = free.len();
        let mut a = DMatrix::zeros(m + 1, m + 1);
        let mut rhs = DVector::zeros(m + 1);
        for (r, &i) in free.iter().enumerate() {
            for (s, &j) in free.iter().enumerate() {
                a[(r, s)] = k[(i, j)];
            }
            a[(r, m)] = 1.0;
            a[(m, r)] = 1.0;
            let fixed: f64 = (0..n).filter(|j| !free.contains(j)).map(|j| k[(i, j)] * beta[j]).sum();
            rhs[r] = y[i] - eps * guess[i].signum() - fixed;
        }
        rhs[m] = -(0..n).filter(|j| !free.contains(j)).map(|j| beta[j]).sum::<f64>();
        let sol = a.lu().solve(&rhs)?;
        for (r, &i) in free.iter().enumerate() {
            let v = sol[r];
            if v.signum() != guess[i].signum() || v.abs() > c {
                return None;
            }
            beta[i] = v;
        }
        bias = sol[m];
        let (lo, hi) = bias_interval(k, y, eps, c, &beta);
        if bias < lo - 1e-9 || bias > hi + 1e-9 {
            return None;
        }
    }
    Some((beta, bias))
}

/// Accelerated projected gradient on the `2n`-variable dual with adaptive
/// restarts, followed by an exact solve on the identified active set.
pub fn solve_svr_dual(x: &[Vec<f64>], y: &[f64], c: f64, eps: f64, gamma: f64) -> OracleSolution {
    let n = y.len();
    let k = kernel(x, gamma);
    let lipschitz = 2.0 * k.symmetric_eigenvalues().max().max(1e-12);
    let step = 1.0 / lipschitz;
    let objective = |z: &[f64]| -> f64 {
        let beta: Vec<f64> = (0..n).map(|i| z[i] - z[n + i]).collect();
        dual_value(&k, y, eps, &beta)
    };

    let mut z = vec![0.0; 2 * n];
    let mut w = z.clone();
    let mut t = 1.0f64;
    for iter in 1..=400_000 {
        let g = gradient(&k, y, eps, &w);
        let v: Vec<f64> = w.iter().zip(&g).map(|(a, b)| a - step * b).collect();
        let z_next = project(&v, n, c);
        let restart = g
            .iter()
            .zip(z_next.iter().zip(&z))
            .map(|(gi, (a, b))| gi * (a - b))
            .sum::<f64>()
            > 0.0;
        let t_next = if restart { 1.0 } else { 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt()) };
        let momentum = if restart { 0.0 } else { (t - 1.0) / t_next };
        w = z_next
            .iter()
            .zip(&z)
            .map(|(a, b)| a + momentum * (a - b))
            .collect();
        z = z_next;
        t = t_next;

        if iter % 500 == 0 {
            let guess: Vec<f64> = (0..n).map(|i| z[i] - z[n + i]).collect();
            if let Some((beta, bias)) = polish(&k, y, eps, c, &guess) {
                let objective = dual_value(&k, y, eps, &beta);
                return OracleSolution {
                    beta,
                    bias,
                    objective,
                    polished: true,
                };
            }
        }
    }
    let beta: Vec<f64> = (0..n).map(|i| z[i] - z[n + i]).collect();
    let (lo, hi) = bias_interval(&k, y, eps, c, &beta);
    OracleSolution {
        objective: objective(&z),
        bias: 0.5 * (lo + hi),
        beta,
        polished: false,
    }
}

pub fn predict(x: &[Vec<f64>], sol: &OracleSolution, gamma: f64, probe: &[f64]) -> f64 {
    x.iter()
        .zip(&sol.beta)
        .map(|(xi, b)| b * rbf(xi, probe, gamma))
        .sum::<f64>()
        + sol.bias
}

/// Textbook single-pass Pearson formula.
pub fn pearson_direct(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let (sx, sy): (f64, f64) = (x.iter().sum(), y.iter().sum());
    let sxx: f64 = x.iter().map(|a| a * a).sum();
    let syy: f64 = y.iter().map(|a| a * a).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| a * b).sum();
    (n * sxy - sx * sy) / ((n * sxx - sx * sx).sqrt() * (n * syy - sy * sy).sqrt())
}

/// Clipped unigram matches of `hyp` against `reference`.
pub fn clipped_unigrams(hyp: &[String], reference: &[String]) -> usize {
    let mut pool: Vec<&String> = reference.iter().collect();
    let mut matched = 0;
    for h in hyp {
        if let Some(pos) = pool.iter().position(|r| *r == h) {
            pool.swap_remove(pos);
            matched += 1;
        }
    }
    matched
}

pub fn min_eigenvalue(m: &[Vec<f64>]) -> f64 {
    let n = m.len();
    let mat = DMatrix::from_fn(n, n, |i, j| m[i][j]);
    mat.symmetric_eigenvalues().min()
}
