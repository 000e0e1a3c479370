//! Weighted natural cubic smoothing spline with knots at every data point.
//!
//! The fit minimizes
//!
//! ```text
//! Σ wᵢ (gᵢ − sᵢ)² + λ ∫ s″(t)² dt
//! ```
//!
//! With Q the n×(n−2) second difference matrix and R the tridiagonal Gram
//! matrix of the second derivatives, the minimizer solves
//! `(W + λ Q R⁻¹ Qᵀ) s = W g` and its second derivatives satisfy
//! `R γ = Qᵀ s`. Going through `QᵀW⁻¹Q` loses all precision once two knots
//! sit within ~1e-6 of the range, so the fitted values and the diagonal of
//! the smoother matrix come instead from the equivalent state-space model:
//! an integrated Wiener process with diffusion 1/λ, observed with noise
//! variance 1/wᵢ, with a diffuse start. A Kalman filter and a Bryson–Frazier
//! backward pass give both in O(n) without dividing by knot gaps.
//!
//! Internally the knots are mapped to [0, 1] and the weights scaled to mean
//! one; [`SplineFit::lambda`] reports λ in the caller's units.

use std::sync::Arc;

use crate::error::{Error, Result};

use super::check_knots;

/// Accepted gap between the smoother trace and the requested df.
pub const DF_TOLERANCE: f64 = 1e-5;

const MAX_BISECTIONS: usize = 200;
const INITIAL_BRACKET: (f64, f64) = (-12.0, 12.0);
const BRACKET_LIMIT: f64 = 60.0;

#[derive(Debug, Clone, PartialEq)]
pub struct SplineFit {
    knots: Arc<[f64]>,
    values: Vec<f64>,
    second_derivs: Vec<f64>,
    lambda: Option<f64>,
    effective_df: f64,
}

impl SplineFit {
    pub(crate) fn from_parts(
        knots: Arc<[f64]>,
        values: Vec<f64>,
        second_derivs: Vec<f64>,
        lambda: Option<f64>,
        effective_df: f64,
    ) -> Result<Self> {
        if values.len() != knots.len() || second_derivs.len() != knots.len() {
            return Err(Error::InvalidInput(
                "spline coefficient arrays do not match the knots".into(),
            ));
        }
        Ok(Self {
            knots,
            values,
            second_derivs,
            lambda,
            effective_df,
        })
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    /// Fitted values sᵢ at the knots.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// s″ at the knots; zero at both ends.
    pub fn second_derivs(&self) -> &[f64] {
        &self.second_derivs
    }

    /// Smoothing parameter in the caller's units (raw weights, raw x).
    /// `None` is the straight-line limit λ → ∞.
    pub fn lambda(&self) -> Option<f64> {
        self.lambda
    }

    /// Trace of the smoother matrix at the chosen λ.
    pub fn effective_df(&self) -> f64 {
        self.effective_df
    }

    pub fn predict(&self, x: f64) -> f64 {
        eval_natural_cubic(&self.knots, &self.values, &self.second_derivs, x)
    }
}

/// Evaluate a natural cubic spline given knot values and second derivatives.
/// Outside the knot range the spline continues linearly.
pub(crate) fn eval_natural_cubic(knots: &[f64], s: &[f64], m: &[f64], x: f64) -> f64 {
    let n = knots.len();
    if x < knots[0] {
        let h = knots[1] - knots[0];
        let slope = (s[1] - s[0]) / h - h * (2.0 * m[0] + m[1]) / 6.0;
        return s[0] + slope * (x - knots[0]);
    }
    if x > knots[n - 1] {
        let h = knots[n - 1] - knots[n - 2];
        let slope = (s[n - 1] - s[n - 2]) / h + h * (m[n - 2] + 2.0 * m[n - 1]) / 6.0;
        return s[n - 1] + slope * (x - knots[n - 1]);
    }
    let i = knots.partition_point(|&k| k <= x).clamp(1, n - 1) - 1;
    let h = knots[i + 1] - knots[i];
    let a = (knots[i + 1] - x) / h;
    let b = (x - knots[i]) / h;
    a * s[i] + b * s[i + 1] + ((a * a * a - a) * m[i] + (b * b * b - b) * m[i + 1]) * h * h / 6.0
}

/// Symmetric banded matrix with up to two off-diagonals, stored by diagonals.
#[derive(Debug, Clone)]
struct Penta {
    d0: Vec<f64>,
    d1: Vec<f64>,
    d2: Vec<f64>,
}

/// LDLᵀ factor of a [`Penta`]: unit lower L with two sub-diagonals.
#[derive(Debug, Clone)]
struct PentaLdl {
    d: Vec<f64>,
    l1: Vec<f64>,
    l2: Vec<f64>,
}

impl Penta {
    fn zeros(m: usize) -> Self {
        Self {
            d0: vec![0.0; m],
            d1: vec![0.0; m.saturating_sub(1)],
            d2: vec![0.0; m.saturating_sub(2)],
        }
    }

    fn factor(&self) -> Result<PentaLdl> {
        let m = self.d0.len();
        let mut d = vec![0.0; m];
        let mut l1 = vec![0.0; m.saturating_sub(1)];
        let mut l2 = vec![0.0; m.saturating_sub(2)];
        for i in 0..m {
            let mut di = self.d0[i];
            if i >= 1 {
                di -= l1[i - 1] * l1[i - 1] * d[i - 1];
            }
            if i >= 2 {
                di -= l2[i - 2] * l2[i - 2] * d[i - 2];
            }
            if !(di > 0.0) || !di.is_finite() {
                return Err(Error::SolveFailure(format!(
                    "banded system is not positive definite (pivot {i} = {di:e})"
                )));
            }
            d[i] = di;
            if i + 1 < m {
                let mut v = self.d1[i];
                if i >= 1 {
                    v -= l2[i - 1] * l1[i - 1] * d[i - 1];
                }
                l1[i] = v / di;
            }
            if i + 2 < m {
                l2[i] = self.d2[i] / di;
            }
        }
        Ok(PentaLdl { d, l1, l2 })
    }
}

impl PentaLdl {
    fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        let m = self.d.len();
        let mut y = rhs.to_vec();
        for i in 0..m {
            if i >= 1 {
                y[i] -= self.l1[i - 1] * y[i - 1];
            }
            if i >= 2 {
                y[i] -= self.l2[i - 2] * y[i - 2];
            }
        }
        for (yi, di) in y.iter_mut().zip(&self.d) {
            *yi /= di;
        }
        for i in (0..m).rev() {
            if i + 1 < m {
                y[i] -= self.l1[i] * y[i + 1];
            }
            if i + 2 < m {
                y[i] -= self.l2[i] * y[i + 2];
            }
        }
        y
    }
}

/// Symmetric 2×2 matrix `[[a, b], [b, c]]`.
#[derive(Debug, Clone, Copy, Default)]
struct Sym2 {
    a: f64,
    b: f64,
    c: f64,
}

impl Sym2 {
    /// `Fᵀ M F` with `F = [[1, h], [0, 1]]`.
    fn pull_back(self, h: f64) -> Sym2 {
        Sym2 {
            a: self.a,
            b: self.a * h + self.b,
            c: self.a * h * h + 2.0 * h * self.b + self.c,
        }
    }

    /// `P − P M P`.
    fn reduce(self, m: Sym2) -> Sym2 {
        let p = self;
        let pm00 = p.a * m.a + p.b * m.b;
        let pm01 = p.a * m.b + p.b * m.c;
        let pm10 = p.b * m.a + p.c * m.b;
        let pm11 = p.b * m.b + p.c * m.c;
        Sym2 {
            a: p.a - (pm00 * p.a + pm01 * p.b),
            b: p.b - (pm00 * p.b + pm01 * p.c),
            c: p.c - (pm10 * p.b + pm11 * p.c),
        }
    }
}

/// Forward-pass record at one knot (index ≥ 2).
#[derive(Debug, Clone, Copy)]
struct Step {
    s: f64,
    k0: f64,
    k1: f64,
    innovation: f64,
    filtered: Sym2,
    mean: [f64; 2],
}

/// Spline learner bound to a knot grid.
#[derive(Debug, Clone)]
pub(crate) struct SplineFitter {
    knots: Arc<[f64]>,
    df: f64,
    scale: f64,
    /// Knot gaps on the unit-scaled grid.
    h: Vec<f64>,
    /// Q's three non-zero entries per column, on the unit-scaled grid.
    q: Vec<[f64; 3]>,
    r: PentaLdl,
}

struct Prepared<'a> {
    fitter: &'a SplineFitter,
    w: Vec<f64>,
    mean_w: f64,
    g: &'a [f64],
}

/// Smoothed values and posterior variances at the knots.
struct Smoothed {
    values: Vec<f64>,
    variances: Vec<f64>,
}

impl SplineFitter {
    pub(crate) fn new(knots: Arc<[f64]>, df: f64) -> Result<Self> {
        check_knots(&knots)?;
        let n = knots.len();
        if n < 4 || !(df >= 2.0) || df > n as f64 {
            return Err(Error::InfeasibleDf { df, n });
        }
        let scale = knots[n - 1] - knots[0];
        let u: Vec<f64> = knots.iter().map(|x| (x - knots[0]) / scale).collect();
        let h: Vec<f64> = u.windows(2).map(|p| p[1] - p[0]).collect();
        if h.iter().any(|&v| !(v > 0.0)) {
            return Err(Error::InvalidInput(
                "knot spacing vanishes after rescaling".into(),
            ));
        }
        let m = n - 2;
        let q = (0..m)
            .map(|j| [1.0 / h[j], -1.0 / h[j] - 1.0 / h[j + 1], 1.0 / h[j + 1]])
            .collect();
        let mut r = Penta::zeros(m);
        for j in 0..m {
            r.d0[j] = (h[j] + h[j + 1]) / 3.0;
            if j + 1 < m {
                r.d1[j] = h[j + 1] / 6.0;
            }
        }
        Ok(Self {
            knots,
            df,
            scale,
            h,
            q,
            r: r.factor()?,
        })
    }

    pub(crate) fn knots(&self) -> &[f64] {
        &self.knots
    }

    pub(crate) fn n(&self) -> usize {
        self.knots.len()
    }

    fn prepare<'a>(&'a self, w: &[f64], g: &'a [f64]) -> Prepared<'a> {
        let mean_w = w.iter().sum::<f64>() / self.n() as f64;
        Prepared {
            fitter: self,
            w: w.iter().map(|v| v / mean_w).collect(),
            mean_w,
            g,
        }
    }

    pub(crate) fn fit(&self, w: &[f64], g: &[f64]) -> Result<SplineFit> {
        let n = self.n() as f64;
        if self.df - 2.0 <= 1e-12 {
            return Ok(self.linear_fit(w, g));
        }
        let prep = self.prepare(w, g);
        if n - self.df <= 1e-12 {
            return prep.solve(0.0, n);
        }
        let log_lambda = prep.search_log_lambda(self.df)?;
        let lambda = 10f64.powf(log_lambda);
        let df = prep.trace(lambda)?;
        prep.solve(lambda, df)
    }

    fn linear_fit(&self, w: &[f64], g: &[f64]) -> SplineFit {
        let sw: f64 = w.iter().sum();
        let xbar = self.knots.iter().zip(w).map(|(x, w)| w * x).sum::<f64>() / sw;
        let gbar = g.iter().zip(w).map(|(g, w)| w * g).sum::<f64>() / sw;
        let (mut sxy, mut sxx) = (0.0, 0.0);
        for ((x, wi), gi) in self.knots.iter().zip(w).zip(g) {
            let dx = x - xbar;
            sxy += wi * dx * (gi - gbar);
            sxx += wi * dx * dx;
        }
        let slope = sxy / sxx;
        let values = self.knots.iter().map(|x| gbar + slope * (x - xbar)).collect();
        SplineFit {
            knots: self.knots.clone(),
            values,
            second_derivs: vec![0.0; self.n()],
            lambda: None,
            effective_df: 2.0,
        }
    }

    /// Raw-unit second derivatives of the natural cubic spline through
    /// `values`, from `R γ = Qᵀ s`.
    fn second_derivs(&self, values: &[f64]) -> Vec<f64> {
        let qts: Vec<f64> = self
            .q
            .iter()
            .enumerate()
            .map(|(j, qj)| qj[0] * values[j] + qj[1] * values[j + 1] + qj[2] * values[j + 2])
            .collect();
        let gamma = self.r.solve(&qts);
        let to_raw = 1.0 / (self.scale * self.scale);
        let mut out = vec![0.0; self.n()];
        for (j, gj) in gamma.iter().enumerate() {
            out[j + 1] = gj * to_raw;
        }
        out
    }
}

impl Prepared<'_> {
    /// Kalman filter and Bryson–Frazier smoother for diffusion `1/lambda`.
    /// Smoothed values are only formed when `with_values` is set.
    #[allow(clippy::needless_range_loop)]
    fn smooth(&self, lambda: f64, with_values: bool) -> Result<Smoothed> {
        let f = self.fitter;
        let n = f.n();
        let q = 1.0 / lambda;
        let g = self.g;
        let r = |i: usize| 1.0 / self.w[i];

        // Exact start: the first two observations pin the state at knot 1.
        let h0 = f.h[0];
        let p1 = Sym2 {
            a: r(1),
            b: r(1) / h0,
            c: (r(0) + r(1)) / (h0 * h0) + q * h0 / 3.0,
        };
        let m1 = [g[1], (g[1] - g[0]) / h0];

        let mut steps: Vec<Step> = Vec::with_capacity(n - 2);
        let (mut p, mut m) = (p1, m1);
        for k in 2..n {
            let h = f.h[k - 1];
            let pp = Sym2 {
                a: p.a + 2.0 * h * p.b + h * h * p.c + q * h * h * h / 3.0,
                b: p.b + h * p.c + q * h * h / 2.0,
                c: p.c + q * h,
            };
            let mp = [m[0] + h * m[1], m[1]];
            let rk = r(k);
            let s = pp.a + rk;
            if !(s.is_finite() && s > 0.0) {
                return Err(Error::SolveFailure(format!(
                    "spline state-space pass broke down at knot {k}"
                )));
            }
            let (k0, k1) = (pp.a / s, pp.b / s);
            p = Sym2 {
                a: pp.a * rk / s,
                b: pp.b * rk / s,
                c: pp.c - pp.b * pp.b / s,
            };
            let innovation = g[k] - mp[0];
            m = [mp[0] + k0 * innovation, mp[1] + k1 * innovation];
            steps.push(Step {
                s,
                k0,
                k1,
                innovation,
                filtered: p,
                mean: m,
            });
        }

        let mut values = vec![0.0; if with_values { n } else { 0 }];
        let mut variances = vec![0.0; n];
        // information and score about the state from the knots after k
        let mut info = Sym2::default();
        let mut score = [0.0; 2];
        for k in (2..n).rev() {
            let st = &steps[k - 2];
            let pf = st.filtered;
            variances[k] = pf.reduce(info).a;
            if with_values {
                values[k] = st.mean[0] - (pf.a * score[0] + pf.b * score[1]);
            }
            let c = 1.0 - st.k0;
            let tilde = Sym2 {
                a: c * c * info.a - 2.0 * c * st.k1 * info.b + st.k1 * st.k1 * info.c + 1.0 / st.s,
                b: c * info.b - st.k1 * info.c,
                c: info.c,
            };
            let score_tilde = [
                -st.innovation / st.s + c * score[0] - st.k1 * score[1],
                score[1],
            ];
            let h = f.h[k - 1];
            info = tilde.pull_back(h);
            score = [score_tilde[0], h * score_tilde[0] + score_tilde[1]];
        }
        let p1s = p1.reduce(info);
        variances[1] = p1s.a;
        let m1s = [
            m1[0] - (p1.a * score[0] + p1.b * score[1]),
            m1[1] - (p1.b * score[0] + p1.c * score[1]),
        ];
        if with_values {
            values[1] = m1s[0];
        }

        // Knot 0 from the smoothed state at knot 1 and its own observation.
        let back = q * h0 * h0 * h0 / 3.0;
        let keep = r(0) / (back + r(0));
        let gain = back / (back + r(0));
        variances[0] = keep * keep * (p1s.a - 2.0 * h0 * p1s.b + h0 * h0 * p1s.c) + back * keep;
        if with_values {
            values[0] = keep * (m1s[0] - h0 * m1s[1]) + gain * g[0];
        }
        Ok(Smoothed { values, variances })
    }

    /// Trace of the smoother matrix, `Σ wᵢ Var(sᵢ | g)`.
    fn trace(&self, lambda: f64) -> Result<f64> {
        if lambda == 0.0 {
            return Ok(self.fitter.n() as f64);
        }
        let sm = self.smooth(lambda, false)?;
        Ok(sm.variances.iter().zip(&self.w).map(|(v, w)| v * w).sum())
    }

    fn search_log_lambda(&self, df: f64) -> Result<f64> {
        let trace_at = |log_l: f64| self.trace(10f64.powf(log_l));
        let (mut lo, mut hi) = INITIAL_BRACKET;
        while trace_at(lo)? < df {
            lo -= 6.0;
            if lo < -BRACKET_LIMIT {
                return Err(Error::SearchFailure(format!(
                    "trace stays below df={df} as lambda shrinks"
                )));
            }
        }
        while trace_at(hi)? > df {
            hi += 6.0;
            if hi > BRACKET_LIMIT {
                return Err(Error::SearchFailure(format!(
                    "trace stays above df={df} as lambda grows"
                )));
            }
        }
        for _ in 0..MAX_BISECTIONS {
            let mid = 0.5 * (lo + hi);
            let t = trace_at(mid)?;
            if (t - df).abs() <= DF_TOLERANCE {
                return Ok(mid);
            }
            if t > df {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Err(Error::SearchFailure(format!(
            "no lambda within {DF_TOLERANCE} of df={df} after {MAX_BISECTIONS} bisections"
        )))
    }

    fn solve(&self, lambda: f64, effective_df: f64) -> Result<SplineFit> {
        let f = self.fitter;
        let values = if lambda == 0.0 {
            self.g.to_vec()
        } else {
            self.smooth(lambda, true)?.values
        };
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::SolveFailure("non-finite spline values".into()));
        }
        Ok(SplineFit {
            knots: f.knots.clone(),
            second_derivs: f.second_derivs(&values),
            values,
            lambda: Some(lambda * f.scale.powi(3) * self.mean_w),
            effective_df,
        })
    }
}
