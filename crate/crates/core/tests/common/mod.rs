//! Independent dense-matrix oracles and random instance generators shared by
//! the integration tests.

#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Strictly increasing knots with irregular gaps.
pub fn random_knots(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    let mut x = Vec::with_capacity(n);
    let mut cur = rng.random_range(-3.0..3.0);
    for _ in 0..n {
        x.push(cur);
        cur += rng.random_range(0.05..1.0);
    }
    x
}

pub fn random_weights(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(0.1..3.0)).collect()
}

pub fn random_responses(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(-2.0..2.0)).collect()
}

/// Natural-spline penalty matrix `K = Q R⁻¹ Qᵀ` built densely from scratch.
pub fn spline_penalty(x: &[f64]) -> DMatrix<f64> {
    let n = x.len();
    let h: Vec<f64> = x.windows(2).map(|p| p[1] - p[0]).collect();
    let mut q = DMatrix::<f64>::zeros(n, n - 2);
    let mut r = DMatrix::<f64>::zeros(n - 2, n - 2);
    for j in 0..n - 2 {
        q[(j, j)] = 1.0 / h[j];
        q[(j + 1, j)] = -1.0 / h[j] - 1.0 / h[j + 1];
        q[(j + 2, j)] = 1.0 / h[j + 1];
        r[(j, j)] = (h[j] + h[j + 1]) / 3.0;
        if j + 1 < n - 2 {
            r[(j, j + 1)] = h[j + 1] / 6.0;
            r[(j + 1, j)] = h[j + 1] / 6.0;
        }
    }
    let r_inv = r.try_inverse().expect("R is positive definite");
    &q * r_inv * q.transpose()
}

/// Smoother matrix `S = (W + λK)⁻¹ W`.
pub fn spline_smoother(x: &[f64], w: &[f64], lambda: f64) -> DMatrix<f64> {
    let wm = DMatrix::from_diagonal(&DVector::from_column_slice(w));
    let a = &wm + spline_penalty(x) * lambda;
    a.lu().solve(&wm).expect("smoother system is nonsingular")
}

/// Coefficients `(β₀, β)` of weighted Gaussian-kernel ridge regression from
/// the joint `(n+1)`-dimensional normal equations, with weights scaled to
/// mean one and the intercept unpenalized.
pub fn kernel_ridge_dense(x: &[f64], w: &[f64], g: &[f64], lambda: f64, h: f64) -> (f64, Vec<f64>) {
    let n = x.len();
    let mean_w = w.iter().sum::<f64>() / n as f64;
    let mut design = DMatrix::<f64>::zeros(n, n + 1);
    for i in 0..n {
        design[(i, 0)] = 1.0;
        for j in 0..n {
            let d = x[i] - x[j];
            design[(i, j + 1)] = (-d * d / (2.0 * h * h)).exp();
        }
    }
    let wm = DMatrix::from_diagonal(&DVector::from_iterator(n, w.iter().map(|v| v / mean_w)));
    let mut lhs = design.transpose() * &wm * &design;
    for j in 1..=n {
        lhs[(j, j)] += lambda;
    }
    let rhs = design.transpose() * &wm * DVector::from_column_slice(g);
    let sol = lhs.lu().solve(&rhs).expect("normal equations are nonsingular");
    (sol[0], sol.iter().skip(1).copied().collect())
}

/// Root cut of a weighted regression tree by exhaustive search: the
/// leftmost midpoint with the smallest two-leaf weighted SSE, if it beats
/// the single leaf.
pub fn exhaustive_root_split(x: &[f64], w: &[f64], g: &[f64]) -> Option<f64> {
    let sse = |lo: usize, hi: usize| {
        let sw: f64 = w[lo..hi].iter().sum();
        let mean = (lo..hi).map(|i| w[i] * g[i]).sum::<f64>() / sw;
        (lo..hi).map(|i| w[i] * (g[i] - mean).powi(2)).sum::<f64>()
    };
    let n = x.len();
    let whole = sse(0, n);
    let mut best: Option<(usize, f64)> = None;
    for k in 1..n {
        let s = sse(0, k) + sse(k, n);
        if best.is_none_or(|(_, b)| s < b - 1e-12 * whole) {
            best = Some((k, s));
        }
    }
    best.filter(|&(_, s)| s < whole * (1.0 - 1e-12))
        .map(|(k, _)| 0.5 * (x[k - 1] + x[k]))
}

/// Composite trapezoid rule on a uniform grid.
pub fn trapezoid(values: &[f64], step: f64) -> f64 {
    let n = values.len();
    values
        .iter()
        .enumerate()
        .map(|(i, v)| if i == 0 || i + 1 == n { 0.5 * v } else { *v })
        .sum::<f64>()
        * step
}
