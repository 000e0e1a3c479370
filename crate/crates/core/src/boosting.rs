//! The boosting loop: starting from f₀ ≡ 0, each iteration turns the
//! second-order expansion of the surrogate likelihood into a weighted least
//! squares problem, fits one weak learner to it, and adds that learner to
//! the log-potential.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::data::{Dataset, QuadratureWeights, RawSamples};
use crate::error::{Error, Result};
use crate::learners::{
    silverman_bandwidth, Bandwidth, FittedLearner, LearnerFitter, LearnerKind, LearnerSpec,
};
use crate::likelihood::{self, KnotFunction};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitConfig {
    pub learner: LearnerSpec,
    /// Number of boosting iterations M.
    pub iterations: usize,
    pub record_trace: bool,
}

impl FitConfig {
    pub fn new(learner: LearnerSpec, iterations: usize) -> Self {
        Self {
            learner,
            iterations,
            record_trace: false,
        }
    }

    pub fn with_trace(mut self) -> Self {
        self.record_trace = true;
        self
    }
}

/// State after iteration `iteration` (0 is the initial f ≡ 0).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub iteration: usize,
    pub surrogate: f64,
    pub log_likelihood: f64,
    pub normalizer: f64,
    /// Largest relative gap between the multiplicatively updated weights
    /// `ωᵢ · e^{b(xᵢ)}` and `aᵢ e^{fᵢ}` recomputed from scratch.
    pub weight_drift: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct FitTrace {
    pub records: Vec<TraceRecord>,
}

impl FitTrace {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn max_weight_drift(&self) -> f64 {
        self.records.iter().map(|r| r.weight_drift).fold(0.0, f64::max)
    }
}

/// Fitted log-potential `f(x) = Σₘ bₘ(x)` with its normalizer on the knots.
#[derive(Debug, Clone, PartialEq)]
pub struct Ensemble {
    pub(crate) knots: Arc<[f64]>,
    pub(crate) freqs: Vec<f64>,
    pub(crate) quad: Vec<f64>,
    pub(crate) sample_count: usize,
    pub(crate) spec: LearnerSpec,
    pub(crate) bandwidth: Option<f64>,
    pub(crate) learners: Vec<FittedLearner>,
    pub(crate) normalizer: f64,
}

impl Ensemble {
    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    pub fn freqs(&self) -> &[f64] {
        &self.freqs
    }

    pub fn quadrature_weights(&self) -> &[f64] {
        &self.quad
    }

    pub fn sample_count(&self) -> usize {
        self.sample_count
    }

    pub fn learner_spec(&self) -> &LearnerSpec {
        &self.spec
    }

    /// Kernel bandwidth actually used, when the learner is a kernel.
    pub fn bandwidth(&self) -> Option<f64> {
        self.bandwidth
    }

    pub fn learners(&self) -> &[FittedLearner] {
        &self.learners
    }

    /// Number of boosting iterations M.
    pub fn len(&self) -> usize {
        self.learners.len()
    }

    pub fn is_empty(&self) -> bool {
        self.learners.is_empty()
    }

    /// `Z = Σ aᵢ e^{f(xᵢ)}`.
    pub fn normalizer(&self) -> f64 {
        self.normalizer
    }

    pub fn support(&self) -> (f64, f64) {
        (self.knots[0], self.knots[self.knots.len() - 1])
    }

    pub fn contains(&self, x: f64) -> bool {
        let (lo, hi) = self.support();
        x >= lo && x <= hi
    }

    fn check_support(&self, x: f64) -> Result<()> {
        if self.contains(x) {
            Ok(())
        } else {
            let (lo, hi) = self.support();
            Err(Error::OutOfSupport { x, lo, hi })
        }
    }

    /// Sum of all learner predictions, without the support check.
    pub(crate) fn f_unchecked(&self, x: f64) -> f64 {
        self.learners.iter().fold(0.0, |acc, l| acc + l.predict(x))
    }

    pub fn evaluate_f(&self, x: f64) -> Result<f64> {
        self.check_support(x)?;
        Ok(self.f_unchecked(x))
    }

    /// `p̂(x) = e^{f(x)} / Z` on the support.
    pub fn density(&self, x: f64) -> Result<f64> {
        self.check_support(x)?;
        Ok(self.f_unchecked(x).exp() / self.normalizer)
    }

    /// Density with the support restriction applied: zero outside `[x₁, xₙ]`.
    pub fn density_or_zero(&self, x: f64) -> f64 {
        if self.contains(x) {
            self.f_unchecked(x).exp() / self.normalizer
        } else {
            0.0
        }
    }

    /// f at every knot, summed in learner order.
    pub fn f_at_knots(&self) -> KnotFunction {
        KnotFunction::new(self.knots.iter().map(|&x| self.f_unchecked(x)).collect())
            .expect("finite learners give finite f")
    }

    /// The ensemble formed by the first `m` learners, with Z recomputed.
    pub fn truncated(&self, m: usize) -> Result<Ensemble> {
        if m > self.len() {
            return Err(Error::InvalidInput(format!(
                "cannot truncate {} learners to {m}",
                self.len()
            )));
        }
        let mut out = self.prefix_unnormalized(m);
        let f = out.f_at_knots();
        out.normalizer = likelihood::normalizer(&out.quad, f.values())?;
        Ok(out)
    }

    /// Prefix whose normalizer is supplied by the caller (from a fit trace).
    pub(crate) fn prefix_with_normalizer(&self, m: usize, normalizer: f64) -> Ensemble {
        let mut out = self.prefix_unnormalized(m);
        out.normalizer = normalizer;
        out
    }

    fn prefix_unnormalized(&self, m: usize) -> Ensemble {
        Ensemble {
            knots: self.knots.clone(),
            freqs: self.freqs.clone(),
            quad: self.quad.clone(),
            sample_count: self.sample_count,
            spec: self.spec,
            bandwidth: self.bandwidth,
            learners: self.learners[..m].to_vec(),
            normalizer: f64::NAN,
        }
    }

    /// Exact log-likelihood of the fitted potential.
    pub fn log_likelihood(&self) -> Result<f64> {
        likelihood::log_likelihood_raw(&self.freqs, &self.quad, self.f_at_knots().values())
    }

    pub fn surrogate(&self) -> Result<f64> {
        likelihood::surrogate_raw(&self.freqs, &self.quad, self.f_at_knots().values())
    }

    /// Collapse learners that share a parameterization into one for fast
    /// evaluation on many points. Results agree with [`Ensemble::evaluate_f`]
    /// up to rounding.
    pub fn compiled(&self) -> CompiledEnsemble {
        CompiledEnsemble::new(self)
    }

    /// Uniform grid of `points` abscissae over the support with f and p̂.
    pub fn density_grid(&self, points: usize) -> Result<Vec<GridPoint>> {
        if points < 2 {
            return Err(Error::InvalidInput(format!(
                "density grid needs at least 2 points, got {points}"
            )));
        }
        let compiled = self.compiled();
        Ok(uniform_grid(self.support(), points)
            .map(|x| {
                let f = compiled.f(x);
                GridPoint {
                    x,
                    f,
                    density: f.exp() / self.normalizer,
                }
            })
            .collect())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridPoint {
    pub x: f64,
    pub f: f64,
    pub density: f64,
}

/// `points` equally spaced values from `lo` to `hi`, endpoints exact.
pub fn uniform_grid((lo, hi): (f64, f64), points: usize) -> impl Iterator<Item = f64> {
    let step = (hi - lo) / (points - 1) as f64;
    (0..points).map(move |i| {
        if i + 1 == points {
            hi
        } else {
            lo + step * i as f64
        }
    })
}

/// An ensemble with all spline learners merged into one spline and all
/// kernel learners merged into one kernel expansion.
#[derive(Debug, Clone)]
pub struct CompiledEnsemble {
    knots: Arc<[f64]>,
    spline: Option<(Vec<f64>, Vec<f64>)>,
    kernel: Option<(f64, Vec<f64>, f64)>,
    rest: Vec<FittedLearner>,
}

impl CompiledEnsemble {
    fn new(ens: &Ensemble) -> Self {
        let n = ens.knots.len();
        let mut spline: Option<(Vec<f64>, Vec<f64>)> = None;
        let mut kernel: Option<(f64, Vec<f64>, f64)> = None;
        let mut rest = Vec::new();
        for l in &ens.learners {
            match l {
                FittedLearner::Spline(s) if s.knots() == &ens.knots[..] => {
                    let (v, m) = spline.get_or_insert_with(|| (vec![0.0; n], vec![0.0; n]));
                    v.iter_mut().zip(s.values()).for_each(|(a, b)| *a += b);
                    m.iter_mut().zip(s.second_derivs()).for_each(|(a, b)| *a += b);
                }
                FittedLearner::Kernel(k)
                    if k.centers() == &ens.knots[..]
                        && kernel.as_ref().is_none_or(|(_, _, h)| *h == k.bandwidth()) =>
                {
                    let (b0, c, _) =
                        kernel.get_or_insert_with(|| (0.0, vec![0.0; n], k.bandwidth()));
                    *b0 += k.intercept();
                    c.iter_mut().zip(k.coefs()).for_each(|(a, b)| *a += b);
                }
                other => rest.push(other.clone()),
            }
        }
        Self {
            knots: ens.knots.clone(),
            spline,
            kernel,
            rest,
        }
    }

    pub fn f(&self, x: f64) -> f64 {
        let mut total = 0.0;
        if let Some((v, m)) = &self.spline {
            total += crate::learners::spline_eval(&self.knots, v, m, x);
        }
        if let Some((b0, coefs, h)) = &self.kernel {
            let scale = -0.5 / (h * h);
            total += b0;
            for (c, b) in self.knots.iter().zip(coefs) {
                if *b != 0.0 {
                    let d = x - c;
                    total += b * (scale * d * d).exp();
                }
            }
        }
        total + self.rest.iter().map(|l| l.predict(x)).sum::<f64>()
    }
}

/// Resolve an automatic kernel bandwidth from the dataset's samples.
pub fn resolve_bandwidth(spec: &LearnerSpec, ds: &Dataset) -> Result<Option<f64>> {
    match *spec {
        LearnerSpec::GaussianKernel {
            bandwidth: Bandwidth::Fixed(h),
            ..
        } => Ok(Some(h)),
        LearnerSpec::GaussianKernel {
            bandwidth: Bandwidth::Auto,
            ..
        } => {
            let samples: Vec<f64> = ds
                .knots()
                .iter()
                .zip(ds.counts())
                .flat_map(|(&x, &c)| std::iter::repeat_n(x, c))
                .collect();
            silverman_bandwidth(&RawSamples::new(samples)?).map(Some)
        }
        _ => Ok(None),
    }
}

fn trace_record(
    iteration: usize,
    q: &[f64],
    a: &[f64],
    f: &[f64],
    weight_drift: f64,
) -> Result<TraceRecord> {
    Ok(TraceRecord {
        iteration,
        surrogate: likelihood::surrogate_raw(q, a, f)?,
        log_likelihood: likelihood::log_likelihood_raw(q, a, f)?,
        normalizer: likelihood::normalizer(a, f)?,
        weight_drift,
    })
}

/// Run M boosting iterations on `ds`.
///
/// The first iteration uses weights ωᵢ = aᵢ (f₀ ≡ 0). Weights are recomputed
/// from the accumulated potential each iteration; the multiplicative update
/// is carried alongside and its drift reported in the trace.
pub fn fit(ds: &Dataset, qw: &QuadratureWeights, cfg: &FitConfig) -> Result<(Ensemble, FitTrace)> {
    if cfg.iterations == 0 {
        return Err(Error::InvalidInput("iterations must be at least 1".into()));
    }
    let (q, a) = (ds.freqs(), qw.as_slice());
    if a.len() != q.len() {
        return Err(Error::InvalidInput(
            "quadrature weights do not belong to this dataset".into(),
        ));
    }
    let knots: Arc<[f64]> = ds.knots().into();
    let bandwidth = resolve_bandwidth(&cfg.learner, ds)?;
    let fitter = LearnerFitter::new(&cfg.learner, knots.clone(), bandwidth)?;

    let n = knots.len();
    let mut f = vec![0.0; n];
    let mut recursive = a.to_vec();
    let mut trace = FitTrace::default();
    if cfg.record_trace {
        trace.records.push(trace_record(0, q, a, &f, 0.0)?);
    }
    let mut learners = Vec::with_capacity(cfg.iterations);
    for m in 1..=cfg.iterations {
        let state = likelihood::weights_responses_raw(q, a, &f, m).map_err(|e| e.at_iteration(m))?;
        let learner = fitter
            .fit(&state.weights, &state.responses)
            .map_err(|e| e.at_iteration(m))?;
        let step = fitter.predict_knots(&learner);
        for ((fi, wi), bi) in f.iter_mut().zip(recursive.iter_mut()).zip(&step) {
            *fi += bi;
            *wi *= bi.exp();
        }
        if f.iter().any(|v| !v.is_finite()) {
            return Err(Error::NumericalRange("f diverged".into()).at_iteration(m));
        }
        if cfg.record_trace {
            let drift = recursive
                .iter()
                .zip(a.iter().zip(&f))
                .map(|(r, (ai, fi))| {
                    let fresh = ai * fi.exp();
                    ((r - fresh) / fresh).abs()
                })
                .fold(0.0, f64::max);
            trace
                .records
                .push(trace_record(m, q, a, &f, drift).map_err(|e| e.at_iteration(m))?);
        }
        learners.push(learner);
    }
    let normalizer = likelihood::normalizer(a, &f)?;
    let ensemble = Ensemble {
        knots,
        freqs: q.to_vec(),
        quad: a.to_vec(),
        sample_count: ds.sample_count(),
        spec: cfg.learner,
        bandwidth,
        learners,
        normalizer,
    };
    Ok((ensemble, trace))
}

/// Convenience: dataset, weights and fit from raw samples.
pub fn fit_samples(raw: &RawSamples, cfg: &FitConfig) -> Result<(Ensemble, FitTrace)> {
    let ds = crate::data::build_dataset(raw)?;
    let qw = crate::data::trapezoid_weights(&ds)?;
    fit(&ds, &qw, cfg)
}

/// Free-function form of [`Ensemble::evaluate_f`].
pub fn evaluate_f(ens: &Ensemble, x: f64) -> Result<f64> {
    ens.evaluate_f(x)
}

/// Free-function form of [`Ensemble::density`].
pub fn density(ens: &Ensemble, x: f64) -> Result<f64> {
    ens.density(x)
}

impl Ensemble {
    pub fn learner_kind(&self) -> LearnerKind {
        self.spec.kind()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{build_dataset, trapezoid_weights};

    fn small() -> (Dataset, QuadratureWeights) {
        let values = vec![0.1, 0.4, 0.4, 0.9, 1.3, 1.35, 2.0, 2.0, 2.0, 2.6, 3.1, 4.0];
        let ds = build_dataset(&RawSamples::new(values).unwrap()).unwrap();
        let qw = trapezoid_weights(&ds).unwrap();
        (ds, qw)
    }

    #[test]
    fn zero_iterations_rejected() {
        let (ds, qw) = small();
        let cfg = FitConfig::new(LearnerSpec::smooth_spline(), 0);
        assert!(fit(&ds, &qw, &cfg).is_err());
    }

    #[test]
    fn empty_prefix_is_uniform() {
        let (ds, qw) = small();
        let (ens, _) = fit(&ds, &qw, &FitConfig::new(LearnerSpec::smooth_spline(), 3)).unwrap();
        let base = ens.truncated(0).unwrap();
        assert_eq!(base.evaluate_f(1.0).unwrap(), 0.0);
        let width = 4.0 - 0.1;
        assert!((base.density(2.2).unwrap() - 1.0 / width).abs() < 1e-15);
        assert!(ens.truncated(4).is_err());
    }

    #[test]
    fn out_of_support() {
        let (ds, qw) = small();
        let (ens, _) = fit(&ds, &qw, &FitConfig::new(LearnerSpec::cart(), 2)).unwrap();
        assert!(matches!(ens.evaluate_f(4.5), Err(Error::OutOfSupport { .. })));
        assert!(matches!(ens.density(0.0), Err(Error::OutOfSupport { .. })));
        assert_eq!(ens.density_or_zero(-3.0), 0.0);
        assert!(ens.density_or_zero(1.0) > 0.0);
    }

    #[test]
    fn infeasible_spline_reports_df() {
        let ds = build_dataset(&RawSamples::new(vec![1.0, 2.0, 2.0, 3.0]).unwrap()).unwrap();
        let qw = trapezoid_weights(&ds).unwrap();
        let err = fit(&ds, &qw, &FitConfig::new(LearnerSpec::smooth_spline(), 5)).unwrap_err();
        assert!(matches!(err, Error::InfeasibleDf { n: 3, .. }), "{err}");
    }

    #[test]
    fn compiled_matches_direct_sum() {
        let (ds, qw) = small();
        for spec in [
            LearnerSpec::smooth_spline(),
            LearnerSpec::gaussian_kernel(),
            LearnerSpec::Cart { minsplit: 4 },
        ] {
            let (ens, _) = fit(&ds, &qw, &FitConfig::new(spec, 7)).unwrap();
            let c = ens.compiled();
            for x in uniform_grid(ens.support(), 57) {
                let direct = ens.evaluate_f(x).unwrap();
                assert!((c.f(x) - direct).abs() < 1e-12 * (1.0 + direct.abs()));
            }
        }
    }

    #[test]
    fn grid_endpoints() {
        let g: Vec<f64> = uniform_grid((1.0, 2.0), 3).collect();
        assert_eq!(g, vec![1.0, 1.5, 2.0]);
    }

    #[test]
    fn trace_has_initial_record() {
        let (ds, qw) = small();
        let cfg = FitConfig::new(LearnerSpec::gaussian_kernel(), 4).with_trace();
        let (ens, trace) = fit(&ds, &qw, &cfg).unwrap();
        assert_eq!(trace.len(), 5);
        assert!((trace.records[0].normalizer - 3.9).abs() < 1e-12);
        assert_eq!(trace.records[4].normalizer, ens.normalizer());
        let mass: f64 = ens
            .knots()
            .iter()
            .zip(ens.quadrature_weights())
            .map(|(&x, a)| a * ens.density(x).unwrap())
            .sum();
        assert!((mass - 1.0).abs() < 1e-12);
    }
}
