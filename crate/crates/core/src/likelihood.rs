//! Exact and surrogate log-likelihood of a Gibbs-form density on the knot
//! grid, plus the weighted least squares bookkeeping used by each boosting
//! step.

use serde::{Deserialize, Serialize};

use crate::data::{Dataset, QuadratureWeights};
use crate::error::{Error, Result};

/// Largest log-potential value accepted before `exp` is considered unsafe.
pub const MAX_LOG_POTENTIAL: f64 = 700.0;

/// Weights below this abort the fit: the potential is diverging to -inf.
pub const WEIGHT_UNDERFLOW: f64 = 1e-300;

/// Values of the log-potential f at each knot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnotFunction(Vec<f64>);

impl KnotFunction {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NumericalRange(format!(
                "f is not finite at knot {i}"
            )));
        }
        Ok(Self(values))
    }

    pub fn zeros(n: usize) -> Self {
        Self(vec![0.0; n])
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Weights ωᵢ and responses gᵢ of one boosting iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct BoostState {
    pub weights: Vec<f64>,
    pub responses: Vec<f64>,
    pub iteration: usize,
}

fn check_dims(q: &[f64], a: &[f64], f: &[f64]) -> Result<()> {
    if q.len() != a.len() || q.len() != f.len() {
        return Err(Error::InvalidInput(format!(
            "dimension mismatch: {} frequencies, {} weights, {} function values",
            q.len(),
            a.len(),
            f.len()
        )));
    }
    Ok(())
}

fn guarded_exp(f: &[f64]) -> Result<impl Iterator<Item = f64> + '_> {
    if let Some(i) = f.iter().position(|&v| v > MAX_LOG_POTENTIAL) {
        return Err(Error::NumericalRange(format!(
            "f = {} at knot {i} exceeds {MAX_LOG_POTENTIAL}",
            f[i]
        )));
    }
    Ok(f.iter().map(|v| v.exp()))
}

/// `log Σ aᵢ e^{fᵢ}` with the maximum subtracted before exponentiation.
pub(crate) fn log_normalizer(a: &[f64], f: &[f64]) -> Result<f64> {
    let shift = f.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let sum: f64 = a.iter().zip(f).map(|(ai, fi)| ai * (fi - shift).exp()).sum();
    let value = shift + sum.ln();
    if !value.is_finite() {
        return Err(Error::NumericalRange(format!(
            "log normalizer is not finite ({value})"
        )));
    }
    Ok(value)
}

pub(crate) fn normalizer(a: &[f64], f: &[f64]) -> Result<f64> {
    let z: f64 = a.iter().zip(guarded_exp(f)?).map(|(ai, e)| ai * e).sum();
    if !z.is_finite() || z <= 0.0 {
        return Err(Error::NumericalRange(format!("normalizer Z = {z}")));
    }
    Ok(z)
}

pub(crate) fn log_likelihood_raw(q: &[f64], a: &[f64], f: &[f64]) -> Result<f64> {
    check_dims(q, a, f)?;
    let fit: f64 = q.iter().zip(f).map(|(qi, fi)| qi * fi).sum();
    Ok(fit - log_normalizer(a, f)?)
}

pub(crate) fn surrogate_raw(q: &[f64], a: &[f64], f: &[f64]) -> Result<f64> {
    check_dims(q, a, f)?;
    let fit: f64 = q.iter().zip(f).map(|(qi, fi)| qi * fi).sum();
    let z: f64 = a.iter().zip(guarded_exp(f)?).map(|(ai, e)| ai * e).sum();
    if !z.is_finite() {
        return Err(Error::NumericalRange("Σ a e^f overflowed".into()));
    }
    Ok(fit - z)
}

pub(crate) fn weights_responses_raw(
    q: &[f64],
    a: &[f64],
    f: &[f64],
    iteration: usize,
) -> Result<BoostState> {
    check_dims(q, a, f)?;
    let weights: Vec<f64> = a.iter().zip(guarded_exp(f)?).map(|(ai, e)| ai * e).collect();
    responses_from_weights(q, weights, iteration)
}

pub(crate) fn responses_from_weights(
    q: &[f64],
    weights: Vec<f64>,
    iteration: usize,
) -> Result<BoostState> {
    if let Some((knot, &weight)) = weights
        .iter()
        .enumerate()
        .find(|(_, w)| !(**w >= WEIGHT_UNDERFLOW))
    {
        return Err(Error::WeightUnderflow { knot, weight });
    }
    if let Some(i) = weights.iter().position(|w| !w.is_finite()) {
        return Err(Error::NumericalRange(format!("weight at knot {i} overflowed")));
    }
    let responses = q.iter().zip(&weights).map(|(qi, w)| (qi - w) / w).collect();
    Ok(BoostState {
        weights,
        responses,
        iteration,
    })
}

/// Exact log-likelihood `Σ qᵢ fᵢ − log Σ aᵢ e^{fᵢ}`.
pub fn log_likelihood(ds: &Dataset, qw: &QuadratureWeights, f: &KnotFunction) -> Result<f64> {
    log_likelihood_raw(ds.freqs(), qw.as_slice(), f.values())
}

/// Gradient of the exact log-likelihood: `qᵢ − aᵢ e^{fᵢ} / Z`.
pub fn log_likelihood_gradient(
    ds: &Dataset,
    qw: &QuadratureWeights,
    f: &KnotFunction,
) -> Result<Vec<f64>> {
    let (q, a, f) = (ds.freqs(), qw.as_slice(), f.values());
    check_dims(q, a, f)?;
    let log_z = log_normalizer(a, f)?;
    Ok(q.iter()
        .zip(a)
        .zip(f)
        .map(|((qi, ai), fi)| qi - ai * (fi - log_z).exp())
        .collect())
}

/// Surrogate `Σ qᵢ fᵢ − Σ aᵢ e^{fᵢ}`, a lower bound with `L(f) ≥ 1 + surrogate(f)`.
pub fn surrogate(ds: &Dataset, qw: &QuadratureWeights, f: &KnotFunction) -> Result<f64> {
    surrogate_raw(ds.freqs(), qw.as_slice(), f.values())
}

/// Per-knot derivative of the surrogate, `qᵢ − aᵢ e^{fᵢ}`.
pub fn surrogate_gradient(
    ds: &Dataset,
    qw: &QuadratureWeights,
    f: &KnotFunction,
) -> Result<Vec<f64>> {
    let (q, a, f) = (ds.freqs(), qw.as_slice(), f.values());
    check_dims(q, a, f)?;
    Ok(q.iter()
        .zip(a)
        .zip(guarded_exp(f)?)
        .map(|((qi, ai), e)| qi - ai * e)
        .collect())
}

/// Weights `ωᵢ = aᵢ e^{fᵢ}` and responses `gᵢ = (qᵢ − ωᵢ)/ωᵢ` for the next
/// weighted least squares step.
pub fn weights_responses(
    ds: &Dataset,
    qw: &QuadratureWeights,
    f: &KnotFunction,
) -> Result<BoostState> {
    weights_responses_raw(ds.freqs(), qw.as_slice(), f.values(), 0)
}
