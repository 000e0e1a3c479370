//! Weak learners for the per-iteration weighted least squares problem.
//!
//! Each learner is fitted on the knot grid with weights ωᵢ and responses gᵢ
//! and returns a [`FittedLearner`] that can be evaluated anywhere on the
//! real line. The boosting engine prepares a [`LearnerFitter`] once per
//! dataset so that per-knot structure (spline bands, kernel Gram matrix) is
//! built a single time.

mod bandwidth;
mod cart;
mod kernel;
mod spline;

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use bandwidth::silverman_bandwidth;
pub use cart::{CartFit, CartNode};
pub use kernel::KernelFit;
pub use spline::{SplineFit, DF_TOLERANCE};

pub(crate) use cart::CartFitter;
pub(crate) use kernel::KernelFitter;
pub(crate) use spline::{eval_natural_cubic as spline_eval, SplineFitter};

pub const DEFAULT_DF: f64 = 3.0;
pub const DEFAULT_RIDGE_LAMBDA: f64 = 1e4;
pub const DEFAULT_MINSPLIT: usize = 30;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Bandwidth {
    /// Silverman's rule of thumb on the raw samples.
    Auto,
    Fixed(f64),
}

/// Which weak learner to use and its complexity limit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum LearnerSpec {
    SmoothSpline { df: f64 },
    GaussianKernel { ridge_lambda: f64, bandwidth: Bandwidth },
    Cart { minsplit: usize },
}

impl LearnerSpec {
    pub fn smooth_spline() -> Self {
        LearnerSpec::SmoothSpline { df: DEFAULT_DF }
    }

    pub fn gaussian_kernel() -> Self {
        LearnerSpec::GaussianKernel {
            ridge_lambda: DEFAULT_RIDGE_LAMBDA,
            bandwidth: Bandwidth::Auto,
        }
    }

    pub fn cart() -> Self {
        LearnerSpec::Cart {
            minsplit: DEFAULT_MINSPLIT,
        }
    }

    pub fn kind(&self) -> LearnerKind {
        match self {
            LearnerSpec::SmoothSpline { .. } => LearnerKind::SmoothSpline,
            LearnerSpec::GaussianKernel { .. } => LearnerKind::GaussianKernel,
            LearnerSpec::Cart { .. } => LearnerKind::Cart,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            LearnerSpec::SmoothSpline { df } if !(df >= 2.0) || !df.is_finite() => Err(
                Error::InvalidInput(format!("spline df must be a finite value >= 2, got {df}")),
            ),
            LearnerSpec::GaussianKernel { ridge_lambda, .. }
                if !(ridge_lambda > 0.0) || !ridge_lambda.is_finite() =>
            {
                Err(Error::InvalidInput(format!(
                    "ridge lambda must be positive and finite, got {ridge_lambda}"
                )))
            }
            LearnerSpec::GaussianKernel {
                bandwidth: Bandwidth::Fixed(h),
                ..
            } if !(h > 0.0) || !h.is_finite() => Err(Error::InvalidInput(format!(
                "bandwidth must be positive, got {h}"
            ))),
            LearnerSpec::Cart { minsplit: 0 } => {
                Err(Error::InvalidInput("minsplit must be positive".into()))
            }
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LearnerKind {
    SmoothSpline,
    GaussianKernel,
    Cart,
}

impl fmt::Display for LearnerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            LearnerKind::SmoothSpline => "smooth-spline",
            LearnerKind::GaussianKernel => "gaussian-kernel",
            LearnerKind::Cart => "cart",
        })
    }
}

/// One fitted base function b(x; γ).
#[derive(Debug, Clone, PartialEq)]
pub enum FittedLearner {
    Spline(SplineFit),
    Kernel(KernelFit),
    Cart(CartFit),
}

impl FittedLearner {
    pub fn kind(&self) -> LearnerKind {
        match self {
            FittedLearner::Spline(_) => LearnerKind::SmoothSpline,
            FittedLearner::Kernel(_) => LearnerKind::GaussianKernel,
            FittedLearner::Cart(_) => LearnerKind::Cart,
        }
    }

    pub fn predict(&self, x: f64) -> f64 {
        match self {
            FittedLearner::Spline(s) => s.predict(x),
            FittedLearner::Kernel(k) => k.predict(x),
            FittedLearner::Cart(c) => c.predict(x),
        }
    }
}

/// Free-function form of [`FittedLearner::predict`].
pub fn predict(learner: &FittedLearner, x: f64) -> f64 {
    learner.predict(x)
}

/// A learner bound to a fixed knot grid, reusable across iterations.
#[derive(Debug, Clone)]
pub(crate) enum LearnerFitter {
    Spline(SplineFitter),
    Kernel(KernelFitter),
    Cart(CartFitter),
}

impl LearnerFitter {
    /// `bandwidth` must already be resolved for kernel learners.
    pub(crate) fn new(spec: &LearnerSpec, knots: Arc<[f64]>, bandwidth: Option<f64>) -> Result<Self> {
        spec.validate()?;
        Ok(match *spec {
            LearnerSpec::SmoothSpline { df } => {
                LearnerFitter::Spline(SplineFitter::new(knots, df)?)
            }
            LearnerSpec::GaussianKernel { ridge_lambda, .. } => {
                let h = bandwidth.ok_or_else(|| {
                    Error::InvalidInput("kernel learner needs a resolved bandwidth".into())
                })?;
                LearnerFitter::Kernel(KernelFitter::new(knots, ridge_lambda, h)?)
            }
            LearnerSpec::Cart { minsplit } => LearnerFitter::Cart(CartFitter::new(knots, minsplit)?),
        })
    }

    pub(crate) fn fit(&self, w: &[f64], g: &[f64]) -> Result<FittedLearner> {
        check_inputs(self.n(), w, g)?;
        match self {
            LearnerFitter::Spline(s) => s.fit(w, g).map(FittedLearner::Spline),
            LearnerFitter::Kernel(k) => k.fit(w, g).map(FittedLearner::Kernel),
            LearnerFitter::Cart(c) => Ok(FittedLearner::Cart(c.fit(w, g))),
        }
    }

    /// Predictions at the knots, bit-identical to [`FittedLearner::predict`].
    pub(crate) fn predict_knots(&self, learner: &FittedLearner) -> Vec<f64> {
        match (self, learner) {
            (LearnerFitter::Kernel(k), FittedLearner::Kernel(fit)) => k.predict_knots(fit),
            (LearnerFitter::Spline(s), l) => s.knots().iter().map(|&x| l.predict(x)).collect(),
            (LearnerFitter::Cart(c), l) => c.knots().iter().map(|&x| l.predict(x)).collect(),
            (LearnerFitter::Kernel(k), l) => k.knots().iter().map(|&x| l.predict(x)).collect(),
        }
    }

    fn n(&self) -> usize {
        match self {
            LearnerFitter::Spline(s) => s.n(),
            LearnerFitter::Kernel(k) => k.n(),
            LearnerFitter::Cart(c) => c.n(),
        }
    }
}

fn check_inputs(n: usize, w: &[f64], g: &[f64]) -> Result<()> {
    if w.len() != n || g.len() != n {
        return Err(Error::InvalidInput(format!(
            "expected {n} weights and responses, got {} and {}",
            w.len(),
            g.len()
        )));
    }
    if let Some(i) = w.iter().position(|&v| !(v > 0.0) || !v.is_finite()) {
        return Err(Error::InvalidInput(format!(
            "weight {i} must be positive and finite, got {}",
            w[i]
        )));
    }
    if let Some(i) = g.iter().position(|v| !v.is_finite()) {
        return Err(Error::InvalidInput(format!("response {i} is not finite")));
    }
    Ok(())
}

pub(crate) fn check_knots(x: &[f64]) -> Result<()> {
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("knots must be finite".into()));
    }
    if x.windows(2).any(|p| !(p[0] < p[1])) {
        return Err(Error::InvalidInput(
            "knots must be strictly increasing".into(),
        ));
    }
    Ok(())
}

/// Weighted natural cubic smoothing spline with `df` effective degrees of freedom.
pub fn fit_spline(x: &[f64], w: &[f64], g: &[f64], df: f64) -> Result<FittedLearner> {
    LearnerFitter::new(&LearnerSpec::SmoothSpline { df }, x.into(), None)?.fit(w, g)
}

/// Gaussian-kernel ridge regression with centers at every knot and an
/// unpenalized intercept.
pub fn fit_kernel_ridge(
    x: &[f64],
    w: &[f64],
    g: &[f64],
    ridge_lambda: f64,
    bandwidth: f64,
) -> Result<FittedLearner> {
    let spec = LearnerSpec::GaussianKernel {
        ridge_lambda,
        bandwidth: Bandwidth::Fixed(bandwidth),
    };
    LearnerFitter::new(&spec, x.into(), Some(bandwidth))?.fit(w, g)
}

/// Greedy weighted regression tree on the knot grid.
pub fn fit_cart(x: &[f64], w: &[f64], g: &[f64], minsplit: usize) -> Result<FittedLearner> {
    LearnerFitter::new(&LearnerSpec::Cart { minsplit }, x.into(), None)?.fit(w, g)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spec_defaults() {
        assert_eq!(LearnerSpec::smooth_spline(), LearnerSpec::SmoothSpline { df: 3.0 });
        assert_eq!(
            LearnerSpec::gaussian_kernel(),
            LearnerSpec::GaussianKernel {
                ridge_lambda: 1e4,
                bandwidth: Bandwidth::Auto
            }
        );
        assert_eq!(LearnerSpec::cart(), LearnerSpec::Cart { minsplit: 30 });
    }

    #[test]
    fn spec_json_shape() {
        let s = serde_json::to_string(&LearnerSpec::gaussian_kernel()).unwrap();
        assert_eq!(
            s,
            r#"{"kind":"gaussian-kernel","ridge_lambda":10000.0,"bandwidth":"auto"}"#
        );
        let back: LearnerSpec = serde_json::from_str(&s).unwrap();
        assert_eq!(back, LearnerSpec::gaussian_kernel());
    }

    #[test]
    fn invalid_specs() {
        assert!(LearnerSpec::SmoothSpline { df: 1.5 }.validate().is_err());
        assert!(LearnerSpec::SmoothSpline { df: f64::NAN }.validate().is_err());
        assert!(LearnerSpec::Cart { minsplit: 0 }.validate().is_err());
        assert!(LearnerSpec::GaussianKernel {
            ridge_lambda: -1.0,
            bandwidth: Bandwidth::Auto
        }
        .validate()
        .is_err());
    }

    #[test]
    fn rejects_bad_weights() {
        let x = [0.0, 1.0, 2.0, 3.0, 4.0];
        let g = [0.0; 5];
        assert!(fit_cart(&x, &[1.0, 1.0, 0.0, 1.0, 1.0], &g, 2).is_err());
        assert!(fit_cart(&x, &[1.0; 4], &g, 2).is_err());
        assert!(fit_cart(&[0.0, 0.0, 1.0], &[1.0; 3], &[0.0; 3], 2).is_err());
    }
}
