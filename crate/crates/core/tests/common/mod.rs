//! Brute-force reference solver for the soft-margin SVM dual, used to check
//! the SMO trainer.

#![allow(dead_code)]

use slidenet::svm::kernel_matrix;

pub struct DualSolution {
    pub alpha: Vec<f64>,
    pub objective: f64,
    pub bias: f64,
}

/// `Σα − ½ ΣΣ αᵢαⱼyᵢyⱼKᵢⱼ`.
pub fn dual_objective(alpha: &[f64], y: &[f64], k: &[f64]) -> f64 {
    let n = alpha.len();
    let mut quad = 0.0;
    for i in 0..n {
        for j in 0..n {
            quad += alpha[i] * alpha[j] * y[i] * y[j] * k[i * n + j];
        }
    }
    alpha.iter().sum::<f64>() - 0.5 * quad
}

fn q_times(q: &[f64], v: &[f64]) -> Vec<f64> {
    let n = v.len();
    (0..n).map(|i| (0..n).map(|j| q[i * n + j] * v[j]).sum()).collect()
}

fn max_eigenvalue(q: &[f64], n: usize) -> f64 {
    let mut v = vec![1.0 / (n as f64).sqrt(); n];
    let mut lambda = 0.0;
    for _ in 0..500 {
        let w = q_times(q, &v);
        let norm = w.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm == 0.0 {
            return 0.0;
        }
        lambda = norm;
        v = w.into_iter().map(|x| x / norm).collect();
    }
    lambda
}

/// Euclidean projection onto `{0 ≤ α ≤ C, yᵀα = 0}` by bisection on the
/// multiplier of the equality constraint.
pub fn project(v: &[f64], y: &[f64], c: f64) -> Vec<f64> {
    let at = |nu: f64| -> Vec<f64> { v.iter().zip(y).map(|(vi, yi)| (vi - nu * yi).clamp(0.0, c)).collect() };
    let g = |nu: f64| -> f64 { at(nu).iter().zip(y).map(|(a, yi)| a * yi).sum() };
    let span = v.iter().map(|x| x.abs()).fold(0.0, f64::max) + c + 1.0;
    let (mut lo, mut hi) = (-span, span);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if g(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    at(0.5 * (lo + hi))
}

/// Bias from the KKT conditions: the mean over free vectors, or the midpoint
/// of the feasible interval when every α sits at a bound.
pub fn kkt_bias(alpha: &[f64], y: &[f64], k: &[f64], c: f64) -> f64 {
    let n = alpha.len();
    let eps = 1e-8 * c;
    let (mut free_sum, mut free_n) = (0.0, 0usize);
    let (mut lo, mut hi) = (f64::NEG_INFINITY, f64::INFINITY);
    for i in 0..n {
        let g: f64 = (0..n).map(|j| alpha[j] * y[j] * k[i * n + j]).sum();
        let r = y[i] - g;
        if alpha[i] > eps && alpha[i] < c - eps {
            free_sum += r;
            free_n += 1;
        } else if (alpha[i] <= eps) == (y[i] > 0.0) {
            lo = lo.max(r);
        } else {
            hi = hi.min(r);
        }
    }
    if free_n > 0 {
        free_sum / free_n as f64
    } else if lo.is_finite() && hi.is_finite() {
        0.5 * (lo + hi)
    } else if lo.is_finite() {
        lo
    } else {
        hi
    }
}

/// Projected gradient ascent on the dual with a fixed `1/(N·λmax(Q))` step.
pub fn solve_dual(x: &[Vec<f64>], y: &[f64], c: f64, gamma: f64, iterations: usize) -> DualSolution {
    solve_dual_scaled(x, y, c, gamma, iterations, x.len() as f64)
}

pub fn solve_dual_scaled(x: &[Vec<f64>], y: &[f64], c: f64, gamma: f64, iterations: usize, scale: f64) -> DualSolution {
    let n = x.len();
    let k = kernel_matrix(x, gamma);
    let q: Vec<f64> = (0..n * n).map(|idx| y[idx / n] * y[idx % n] * k[idx]).collect();
    let step = 1.0 / (scale * max_eigenvalue(&q, n).max(1e-12));
    let mut alpha = vec![0.0; n];
    for _ in 0..iterations {
        let qa = q_times(&q, &alpha);
        let v: Vec<f64> = alpha.iter().zip(&qa).map(|(a, g)| a + step * (1.0 - g)).collect();
        let next = project(&v, y, c);
        let moved = next.iter().zip(&alpha).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        alpha = next;
        if moved < 1e-15 {
            break;
        }
    }
    let objective = dual_objective(&alpha, y, &k);
    let bias = kkt_bias(&alpha, y, &k, c);
    DualSolution { alpha, objective, bias }
}

/// Decision value of a dual solution at `probe`.
pub fn decision(x: &[Vec<f64>], y: &[f64], sol: &DualSolution, gamma: f64, probe: &[f64]) -> f64 {
    x.iter()
        .zip(y)
        .zip(&sol.alpha)
        .map(|((xi, yi), a)| {
            let d: f64 = xi.iter().zip(probe).map(|(p, q)| (p - q) * (p - q)).sum();
            a * yi * (-gamma * d).exp()
        })
        .sum::<f64>()
        + sol.bias
}

/// Eigenvalues of a symmetric matrix by cyclic Jacobi rotations.
pub fn symmetric_eigenvalues(a: &[f64], n: usize) -> Vec<f64> {
    let mut m = a.to_vec();
    for _ in 0..100 {
        let off: f64 = (0..n).flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j))).map(|(i, j)| m[i * n + j].powi(2)).sum();
        if off < 1e-24 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = m[p * n + q];
                if apq.abs() < 1e-300 {
                    continue;
                }
                let theta = (m[q * n + q] - m[p * n + p]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let cs = 1.0 / (t * t + 1.0).sqrt();
                let sn = t * cs;
                for k in 0..n {
                    let (mkp, mkq) = (m[k * n + p], m[k * n + q]);
                    m[k * n + p] = cs * mkp - sn * mkq;
                    m[k * n + q] = sn * mkp + cs * mkq;
                }
                for k in 0..n {
                    let (mpk, mqk) = (m[p * n + k], m[q * n + k]);
                    m[p * n + k] = cs * mpk - sn * mqk;
                    m[q * n + k] = sn * mpk + cs * mqk;
                }
            }
        }
    }
    (0..n).map(|i| m[i * n + i]).collect()
}

/// Random instance with `n` rows in `[-1, 1]^d` and both classes present.
pub fn random_instance(rng: &mut impl rand::Rng, n: usize, d: usize) -> (Vec<Vec<f64>>, Vec<i8>) {
    let x: Vec<Vec<f64>> = (0..n).map(|_| (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect();
    let mut y: Vec<i8> = x.iter().map(|r| if r[0] + 0.3 * rng.gen_range(-1.0..1.0) > 0.0 { 1 } else { -1 }).collect();
    y[0] = 1;
    y[1] = -1;
    (x, y)
}
