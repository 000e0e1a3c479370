//! Empirical objects built from raw samples: sorted unique knots, their
//! calibrated frequencies, and the trapezoid quadrature weights used to
//! normalize a density on the knot grid.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Unordered i.i.d. draws, duplicates allowed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawSamples {
    values: Vec<f64>,
}

impl RawSamples {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidInput("no samples".into()));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "sample {i} is not finite ({})",
                values[i]
            )));
        }
        Ok(Self { values })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Sample count N.
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Sorted distinct sample points with their empirical frequencies.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    knots: Vec<f64>,
    freqs: Vec<f64>,
    counts: Vec<usize>,
    sample_count: usize,
}

impl Dataset {
    /// Distinct knots x₁ < … < xₙ.
    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    /// Frequencies qᵢ = count(xᵢ) / N.
    pub fn freqs(&self) -> &[f64] {
        &self.freqs
    }

    /// Multiplicity of each knot in the raw samples.
    pub fn counts(&self) -> &[usize] {
        &self.counts
    }

    /// Number of distinct knots n.
    pub fn n(&self) -> usize {
        self.knots.len()
    }

    /// Raw sample count N.
    pub fn sample_count(&self) -> usize {
        self.sample_count
    }

    pub fn support(&self) -> (f64, f64) {
        (self.knots[0], self.knots[self.knots.len() - 1])
    }
}

/// Composite trapezoid coefficients aᵢ on the knot grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuadratureWeights {
    weights: Vec<f64>,
}

impl QuadratureWeights {
    pub fn as_slice(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }
}

/// Collapse raw samples onto their distinct values.
///
/// Ties are detected with exact floating-point equality; near-duplicates stay
/// separate knots. Negative zero is folded into positive zero so that the
/// result does not depend on the order of the input.
pub fn build_dataset(raw: &RawSamples) -> Result<Dataset> {
    let mut sorted: Vec<f64> = raw.values().iter().map(|v| v + 0.0).collect();
    if let Some(v) = sorted.iter().find(|v| !v.is_finite()) {
        return Err(Error::InvalidInput(format!("non-finite sample {v}")));
    }
    sorted.sort_by(f64::total_cmp);

    let mut knots = Vec::new();
    let mut counts: Vec<usize> = Vec::new();
    for v in sorted {
        match knots.last() {
            Some(&last) if last == v => *counts.last_mut().unwrap() += 1,
            _ => {
                knots.push(v);
                counts.push(1);
            }
        }
    }
    if knots.len() < 2 {
        return Err(Error::DegenerateSupport(format!(
            "need at least 2 distinct values, got {}",
            knots.len()
        )));
    }

    let total = raw.len();
    let freqs = counts.iter().map(|&c| c as f64 / total as f64).collect();
    Ok(Dataset {
        knots,
        freqs,
        counts,
        sample_count: total,
    })
}

/// Trapezoid weights for integrating over `[x₁, xₙ]` using only knot values.
pub fn trapezoid_weights(ds: &Dataset) -> Result<QuadratureWeights> {
    trapezoid_on(ds.knots()).map(|weights| QuadratureWeights { weights })
}

pub(crate) fn trapezoid_on(x: &[f64]) -> Result<Vec<f64>> {
    let n = x.len();
    if n < 2 {
        return Err(Error::DegenerateSupport(format!(
            "trapezoid rule needs 2 knots, got {n}"
        )));
    }
    let mut a = Vec::with_capacity(n);
    a.push((x[1] - x[0]) / 2.0);
    for i in 1..n - 1 {
        a.push((x[i + 1] - x[i - 1]) / 2.0);
    }
    a.push((x[n - 1] - x[n - 2]) / 2.0);
    Ok(a)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::collections::BTreeMap;

    fn ds(values: &[f64]) -> Result<Dataset> {
        build_dataset(&RawSamples::new(values.to_vec())?)
    }

    #[test]
    fn counts_ties() {
        let d = ds(&[1.0, 2.0, 2.0, 3.0]).unwrap();
        assert_eq!(d.knots(), &[1.0, 2.0, 3.0]);
        assert_eq!(d.freqs(), &[0.25, 0.5, 0.25]);
        assert_eq!(d.n(), 3);
        assert_eq!(d.sample_count(), 4);
    }

    #[test]
    fn unsorted_input() {
        let d = ds(&[0.3, -1.2, 0.3, 7.0, 7.0, 7.0]).unwrap();
        assert_eq!(d.knots(), &[-1.2, 0.3, 7.0]);
        assert_eq!(d.freqs(), &[1.0 / 6.0, 2.0 / 6.0, 3.0 / 6.0]);
    }

    #[test]
    fn single_value_is_degenerate() {
        assert!(matches!(ds(&[5.0, 5.0]), Err(Error::DegenerateSupport(_))));
    }

    #[test]
    fn non_finite_rejected() {
        assert!(matches!(
            RawSamples::new(vec![1.0, f64::NAN]),
            Err(Error::InvalidInput(_))
        ));
        assert!(RawSamples::new(vec![]).is_err());
    }

    #[test]
    fn signed_zero_is_one_knot() {
        let d = ds(&[-0.0, 0.0, 1.0]).unwrap();
        assert_eq!(d.n(), 2);
        assert_eq!(d.counts(), &[2, 1]);
        assert!(d.knots()[0].is_sign_positive());
    }

    #[test]
    fn trapezoid_examples() {
        assert_eq!(trapezoid_on(&[0.0, 1.0, 3.0]).unwrap(), vec![0.5, 1.5, 1.0]);
        assert_eq!(trapezoid_on(&[1.0, 2.0, 3.0]).unwrap(), vec![0.5, 1.0, 0.5]);
        assert!(matches!(
            trapezoid_on(&[1.0]),
            Err(Error::DegenerateSupport(_))
        ));
    }

    proptest! {
        #[test]
        fn frequencies_match_naive_count(
            vals in prop::collection::vec(-4i32..4, 2..=12),
            scale in 0.1f64..10.0,
        ) {
            let values: Vec<f64> = vals.iter().map(|&v| v as f64 * scale).collect();
            let raw = RawSamples::new(values.clone()).unwrap();
            let mut naive: BTreeMap<i32, usize> = BTreeMap::new();
            for v in &vals {
                *naive.entry(*v).or_default() += 1;
            }
            match build_dataset(&raw) {
                Err(Error::DegenerateSupport(_)) => prop_assert_eq!(naive.len(), 1),
                Err(e) => prop_assert!(false, "unexpected error {e}"),
                Ok(d) => {
                    prop_assert_eq!(d.n(), naive.len());
                    for ((k, c), (x, q)) in naive.iter().zip(d.knots().iter().zip(d.freqs())) {
                        prop_assert_eq!(*x, *k as f64 * scale);
                        prop_assert_eq!(*q, *c as f64 / vals.len() as f64);
                    }
                    let total: f64 = d.freqs().iter().sum();
                    prop_assert!((total - 1.0).abs() <= 1e-12);
                    for q in d.freqs() {
                        let nq = q * vals.len() as f64;
                        prop_assert!((nq - nq.round()).abs() < 1e-9 && nq.round() >= 1.0);
                    }
                }
            }
        }

        #[test]
        fn permutation_invariant_and_telescoping(
            mut values in prop::collection::vec(-100.0f64..100.0, 2..40),
            seed in any::<u64>(),
        ) {
            values.push(values[0] + 1.0);
            let a = build_dataset(&RawSamples::new(values.clone()).unwrap()).unwrap();
            // deterministic shuffle
            let mut state = seed | 1;
            for i in (1..values.len()).rev() {
                state ^= state << 13;
                state ^= state >> 7;
                state ^= state << 17;
                values.swap(i, (state % (i as u64 + 1)) as usize);
            }
            let b = build_dataset(&RawSamples::new(values).unwrap()).unwrap();
            prop_assert_eq!(&a, &b);

            let w = trapezoid_weights(&a).unwrap();
            let (lo, hi) = a.support();
            let sum: f64 = w.as_slice().iter().sum();
            prop_assert!(((sum - (hi - lo)) / (hi - lo)).abs() <= 1e-12);
            prop_assert!(w.as_slice().iter().all(|&v| v > 0.0));
        }
    }
}
