//! Gaussian-kernel ridge regression with an unpenalized intercept.
//!
//! Weights are rescaled to mean one, then
//!
//! ```text
//! min Σ wᵢ (gᵢ − β₀ − Φᵢ·β)² + λ |β|²,   Φᵢⱼ = exp(−(xᵢ − xⱼ)² / 2h²)
//! ```
//!
//! Eliminating β₀ leaves the positive definite system
//! `(Φ_cᵀ W Φ_c + λI) β = Φ_cᵀ W (g − ḡ)` with Φ_c the weighted column-centred
//! design. It is solved by Jacobi-preconditioned conjugate gradients; the
//! spectrum is bounded below by λ so convergence is fast for the large
//! ridge penalties used in boosting. A dense Cholesky solve is the fallback.

use std::sync::Arc;

use crate::error::{Error, Result};

use super::check_knots;

const CG_RELATIVE_TOLERANCE: f64 = 1e-14;

#[derive(Debug, Clone, PartialEq)]
pub struct KernelFit {
    centers: Arc<[f64]>,
    intercept: f64,
    coefs: Vec<f64>,
    bandwidth: f64,
}

impl KernelFit {
    pub(crate) fn from_parts(
        centers: Arc<[f64]>,
        intercept: f64,
        coefs: Vec<f64>,
        bandwidth: f64,
    ) -> Result<Self> {
        if coefs.len() != centers.len() || !(bandwidth > 0.0) {
            return Err(Error::InvalidInput(
                "kernel coefficients do not match the centers".into(),
            ));
        }
        Ok(Self {
            centers,
            intercept,
            coefs,
            bandwidth,
        })
    }

    pub fn centers(&self) -> &[f64] {
        &self.centers
    }

    pub fn intercept(&self) -> f64 {
        self.intercept
    }

    pub fn coefs(&self) -> &[f64] {
        &self.coefs
    }

    pub fn bandwidth(&self) -> f64 {
        self.bandwidth
    }

    pub fn predict(&self, x: f64) -> f64 {
        let scale = -0.5 / (self.bandwidth * self.bandwidth);
        let mut sum = self.intercept;
        for (c, b) in self.centers.iter().zip(&self.coefs) {
            let d = x - c;
            sum += b * (scale * d * d).exp();
        }
        sum
    }
}

#[derive(Debug, Clone)]
pub(crate) struct KernelFitter {
    centers: Arc<[f64]>,
    ridge_lambda: f64,
    bandwidth: f64,
    /// Symmetric Gram matrix, row-major n×n.
    gram: Vec<f64>,
}

impl KernelFitter {
    pub(crate) fn new(centers: Arc<[f64]>, ridge_lambda: f64, bandwidth: f64) -> Result<Self> {
        check_knots(&centers)?;
        if centers.len() < 2 {
            return Err(Error::InvalidInput(
                "kernel ridge needs at least 2 knots".into(),
            ));
        }
        if !(bandwidth > 0.0) || !bandwidth.is_finite() {
            return Err(Error::InvalidInput(format!(
                "bandwidth must be positive, got {bandwidth}"
            )));
        }
        let n = centers.len();
        let scale = -0.5 / (bandwidth * bandwidth);
        let mut gram = vec![0.0; n * n];
        for i in 0..n {
            gram[i * n + i] = 1.0;
            for j in 0..i {
                let d = centers[i] - centers[j];
                let k = (scale * d * d).exp();
                gram[i * n + j] = k;
                gram[j * n + i] = k;
            }
        }
        Ok(Self {
            centers,
            ridge_lambda,
            bandwidth,
            gram,
        })
    }

    pub(crate) fn knots(&self) -> &[f64] {
        &self.centers
    }

    pub(crate) fn n(&self) -> usize {
        self.centers.len()
    }

    /// Same summation order and kernel values as [`KernelFit::predict`],
    /// with the exponentials taken from the Gram matrix.
    pub(crate) fn predict_knots(&self, fit: &KernelFit) -> Vec<f64> {
        let n = self.n();
        (0..n)
            .map(|i| {
                let row = &self.gram[i * n..(i + 1) * n];
                let mut sum = fit.intercept;
                for (b, k) in fit.coefs.iter().zip(row) {
                    sum += b * k;
                }
                sum
            })
            .collect()
    }

    fn gram_mul(&self, v: &[f64], out: &mut [f64]) {
        let n = self.n();
        for (i, o) in out.iter_mut().enumerate() {
            let row = &self.gram[i * n..(i + 1) * n];
            *o = row.iter().zip(v).map(|(a, b)| a * b).sum();
        }
    }

    pub(crate) fn fit(&self, w: &[f64], g: &[f64]) -> Result<KernelFit> {
        let n = self.n();
        let mean_w = w.iter().sum::<f64>() / n as f64;
        let w: Vec<f64> = w.iter().map(|v| v / mean_w).collect();
        let total_w: f64 = w.iter().sum();
        let g_bar = w.iter().zip(g).map(|(a, b)| a * b).sum::<f64>() / total_w;

        // weighted column means of the design
        let mut col_mean = vec![0.0; n];
        self.gram_mul(&w, &mut col_mean);
        col_mean.iter_mut().for_each(|v| *v /= total_w);

        let resid: Vec<f64> = w.iter().zip(g).map(|(wi, gi)| wi * (gi - g_bar)).collect();
        let mut rhs = vec![0.0; n];
        self.gram_mul(&resid, &mut rhs);

        let coefs = if rhs.iter().all(|&v| v == 0.0) {
            vec![0.0; n]
        } else {
            match self.solve_cg(&w, &col_mean, &rhs) {
                Some(beta) => beta,
                None => self.solve_dense(&w, &col_mean, &rhs)?,
            }
        };
        let intercept = g_bar - col_mean.iter().zip(&coefs).map(|(a, b)| a * b).sum::<f64>();
        if !intercept.is_finite() || coefs.iter().any(|b| !b.is_finite()) {
            return Err(Error::SolveFailure(
                "kernel ridge produced non-finite coefficients".into(),
            ));
        }
        Ok(KernelFit {
            centers: self.centers.clone(),
            intercept,
            coefs,
            bandwidth: self.bandwidth,
        })
    }

    /// `v ↦ Φ_cᵀ W Φ_c v + λ v`.
    fn apply(&self, w: &[f64], col_mean: &[f64], v: &[f64], tmp: &mut [f64], out: &mut [f64]) {
        self.gram_mul(v, tmp);
        let shift: f64 = col_mean.iter().zip(v).map(|(a, b)| a * b).sum();
        for (t, wi) in tmp.iter_mut().zip(w) {
            *t = wi * (*t - shift);
        }
        // Σ tmp = 0 by construction, so the centring term drops out of Φ_cᵀ.
        self.gram_mul(tmp, out);
        for (o, vi) in out.iter_mut().zip(v) {
            *o += self.ridge_lambda * vi;
        }
    }

    fn solve_cg(&self, w: &[f64], col_mean: &[f64], rhs: &[f64]) -> Option<Vec<f64>> {
        let n = self.n();
        let precond: Vec<f64> = (0..n)
            .map(|j| {
                let d: f64 = (0..n)
                    .map(|i| {
                        let c = self.gram[i * n + j] - col_mean[j];
                        w[i] * c * c
                    })
                    .sum();
                1.0 / (d + self.ridge_lambda)
            })
            .collect();
        let rhs_norm = rhs.iter().map(|v| v * v).sum::<f64>().sqrt();
        let mut x = vec![0.0; n];
        let mut r = rhs.to_vec();
        let mut z: Vec<f64> = r.iter().zip(&precond).map(|(a, b)| a * b).collect();
        let mut p = z.clone();
        let mut rz: f64 = r.iter().zip(&z).map(|(a, b)| a * b).sum();
        let mut ap = vec![0.0; n];
        let mut tmp = vec![0.0; n];
        for _ in 0..(2 * n + 50) {
            self.apply(w, col_mean, &p, &mut tmp, &mut ap);
            let pap: f64 = p.iter().zip(&ap).map(|(a, b)| a * b).sum();
            if !(pap > 0.0) {
                return None;
            }
            let alpha = rz / pap;
            for i in 0..n {
                x[i] += alpha * p[i];
                r[i] -= alpha * ap[i];
            }
            let r_norm = r.iter().map(|v| v * v).sum::<f64>().sqrt();
            if r_norm <= CG_RELATIVE_TOLERANCE * rhs_norm {
                return Some(x);
            }
            for i in 0..n {
                z[i] = r[i] * precond[i];
            }
            let rz_next: f64 = r.iter().zip(&z).map(|(a, b)| a * b).sum();
            let beta = rz_next / rz;
            rz = rz_next;
            for i in 0..n {
                p[i] = z[i] + beta * p[i];
            }
        }
        None
    }

    fn solve_dense(&self, w: &[f64], col_mean: &[f64], rhs: &[f64]) -> Result<Vec<f64>> {
        let n = self.n();
        let mut a = vec![0.0; n * n];
        let mut e = vec![0.0; n];
        let mut col = vec![0.0; n];
        let mut tmp = vec![0.0; n];
        for j in 0..n {
            e.iter_mut().for_each(|v| *v = 0.0);
            e[j] = 1.0;
            self.apply(w, col_mean, &e, &mut tmp, &mut col);
            for i in 0..n {
                a[i * n + j] = col[i];
            }
        }
        cholesky_solve(&mut a, n, rhs)
    }
}

/// In-place Cholesky factorisation and solve of a dense SPD system.
fn cholesky_solve(a: &mut [f64], n: usize, rhs: &[f64]) -> Result<Vec<f64>> {
    for j in 0..n {
        let mut d = a[j * n + j];
        for k in 0..j {
            d -= a[j * n + k] * a[j * n + k];
        }
        if !(d > 0.0) {
            return Err(Error::SolveFailure(format!(
                "kernel normal equations are not positive definite (pivot {j})"
            )));
        }
        let d = d.sqrt();
        a[j * n + j] = d;
        for i in j + 1..n {
            let mut v = a[i * n + j];
            for k in 0..j {
                v -= a[i * n + k] * a[j * n + k];
            }
            a[i * n + j] = v / d;
        }
    }
    let mut y = rhs.to_vec();
    for i in 0..n {
        for k in 0..i {
            y[i] -= a[i * n + k] * y[k];
        }
        y[i] /= a[i * n + i];
    }
    for i in (0..n).rev() {
        for k in i + 1..n {
            y[i] -= a[k * n + i] * y[k];
        }
        y[i] /= a[i * n + i];
    }
    Ok(y)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fitter(x: &[f64], lambda: f64, h: f64) -> KernelFitter {
        KernelFitter::new(x.into(), lambda, h).unwrap()
    }

    #[test]
    fn constant_response_is_absorbed_by_intercept() {
        let x = [0.0, 0.4, 1.1, 2.0, 2.2];
        let w = [0.2, 1.0, 3.0, 0.7, 1.1];
        let fit = fitter(&x, 1e4, 0.5).fit(&w, &[1.75; 5]).unwrap();
        assert!(fit.coefs().iter().all(|&b| b == 0.0));
        assert!((fit.intercept() - 1.75).abs() < 1e-15);
        assert!((fit.predict(1.3) - 1.75).abs() < 1e-15);
    }

    #[test]
    fn huge_penalty_gives_weighted_mean() {
        let x = [0.0, 1.0, 2.0, 3.0];
        let w = [1.0, 2.0, 3.0, 4.0];
        let g = [1.0, -1.0, 2.0, 0.5];
        let fit = fitter(&x, 1e14, 1.0).fit(&w, &g).unwrap();
        let mean = (1.0 - 2.0 + 6.0 + 2.0) / 10.0;
        for xi in [0.0, 0.5, 3.0, 10.0] {
            assert!((fit.predict(xi) - mean).abs() < 1e-9);
        }
    }

    #[test]
    fn cg_agrees_with_dense_fallback() {
        let x: Vec<f64> = (0..25).map(|i| (i as f64 * 0.37).sin() * 3.0 + i as f64 * 0.1).collect();
        let mut x = x;
        x.sort_by(f64::total_cmp);
        let w: Vec<f64> = (0..25).map(|i| 0.1 + (i * 7 % 5) as f64).collect();
        let g: Vec<f64> = (0..25).map(|i| ((i * 3) as f64).cos()).collect();
        for lambda in [1e-2, 1.0, 1e4] {
            let f = fitter(&x, lambda, 0.6);
            let n = x.len() as f64;
            let mean_w = w.iter().sum::<f64>() / n;
            let wn: Vec<f64> = w.iter().map(|v| v / mean_w).collect();
            let total: f64 = wn.iter().sum();
            let g_bar = wn.iter().zip(&g).map(|(a, b)| a * b).sum::<f64>() / total;
            let mut col_mean = vec![0.0; x.len()];
            f.gram_mul(&wn, &mut col_mean);
            col_mean.iter_mut().for_each(|v| *v /= total);
            let resid: Vec<f64> = wn.iter().zip(&g).map(|(a, b)| a * (b - g_bar)).collect();
            let mut rhs = vec![0.0; x.len()];
            f.gram_mul(&resid, &mut rhs);
            let cg = f.solve_cg(&wn, &col_mean, &rhs).unwrap();
            let dense = f.solve_dense(&wn, &col_mean, &rhs).unwrap();
            for (a, b) in cg.iter().zip(&dense) {
                assert!((a - b).abs() < 1e-8 * (1.0 + b.abs()), "lambda {lambda}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn knot_predictions_are_bit_identical() {
        let x = [-1.3, -0.2, 0.0, 0.45, 1.7, 2.0, 3.3];
        let f = fitter(&x, 3.0, 0.8);
        let w = [1.0, 0.3, 2.0, 1.5, 0.2, 1.0, 0.9];
        let g = [0.4, -1.0, 2.2, 0.1, -0.3, 1.1, 0.0];
        let fit = f.fit(&w, &g).unwrap();
        let fast = f.predict_knots(&fit);
        for (xi, v) in x.iter().zip(&fast) {
            assert_eq!(fit.predict(*xi).to_bits(), v.to_bits());
        }
    }

    #[test]
    fn predict_at_center_uses_unit_kernel() {
        let fit = KernelFit::from_parts(vec![0.0, 10.0].into(), 0.5, vec![2.0, 0.0], 0.1).unwrap();
        assert_eq!(fit.predict(0.0), 2.5);
        assert_eq!(fit.predict(10.0), 0.5 + 2.0 * (-0.5f64 * 1e4).exp());
    }
}
