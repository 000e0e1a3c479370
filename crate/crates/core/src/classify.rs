//! Two-class plug-in Bayes classifier built from per-class boosted densities,
//! and the repeated random-split experiment.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::boosting::{fit_samples, Ensemble, FitConfig};
use crate::data::RawSamples;
use crate::error::{Error, Result};
use crate::learners::LearnerSpec;
use crate::sim::mean_sd;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledDataset {
    features: Vec<f64>,
    labels: Vec<u8>,
}

impl LabeledDataset {
    pub fn new(features: Vec<f64>, labels: Vec<u8>) -> Result<Self> {
        if features.len() != labels.len() {
            return Err(Error::InvalidInput(format!(
                "{} features but {} labels",
                features.len(),
                labels.len()
            )));
        }
        if features.is_empty() {
            return Err(Error::InvalidInput("labeled dataset is empty".into()));
        }
        if let Some(i) = features.iter().position(|x| !x.is_finite()) {
            return Err(Error::InvalidRow {
                row: i,
                message: format!("non-finite feature {}", features[i]),
            });
        }
        if let Some(i) = labels.iter().position(|&y| y > 1) {
            return Err(Error::InvalidRow {
                row: i,
                message: format!("label {} is not 0 or 1", labels[i]),
            });
        }
        Ok(Self { features, labels })
    }

    pub fn features(&self) -> &[f64] {
        &self.features
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn class_counts(&self) -> [usize; 2] {
        let ones = self.labels.iter().filter(|&&y| y == 1).count();
        [self.len() - ones, ones]
    }

    pub fn subset(&self, idx: &[usize]) -> Result<Self> {
        Self::new(
            idx.iter().map(|&i| self.features[i]).collect(),
            idx.iter().map(|&i| self.labels[i]).collect(),
        )
    }

    fn class_values(&self, class: u8) -> Vec<f64> {
        self.features
            .iter()
            .zip(&self.labels)
            .filter(|(_, &y)| y == class)
            .map(|(&x, _)| x)
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BayesModel {
    densities: [Ensemble; 2],
    priors: [f64; 2],
}

fn distinct_count(values: &[f64]) -> usize {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    v.dedup();
    v.len()
}

fn fit_class(train: &LabeledDataset, class: u8, cfg: &FitConfig) -> Result<Ensemble> {
    let values = train.class_values(class);
    let need = match cfg.learner {
        LearnerSpec::SmoothSpline { .. } => 4,
        _ => 2,
    };
    let distinct = distinct_count(&values);
    if distinct < need {
        return Err(Error::InfeasibleClass {
            class,
            reason: format!("{distinct} distinct feature values, need at least {need}"),
        });
    }
    let raw = RawSamples::new(values)?;
    match fit_samples(&raw, cfg) {
        Ok((ens, _)) => Ok(ens),
        Err(e @ (Error::InfeasibleDf { .. } | Error::DegenerateSpread)) => Err(Error::InfeasibleClass {
            class,
            reason: e.to_string(),
        }),
        Err(e) => Err(e),
    }
}

/// Fits one boosted density per class; priors are the class frequencies.
pub fn fit_bayes(train: &LabeledDataset, cfg: &FitConfig) -> Result<BayesModel> {
    let counts = train.class_counts();
    let total = train.len() as f64;
    let d0 = fit_class(train, 0, cfg)?;
    let d1 = fit_class(train, 1, cfg)?;
    Ok(BayesModel {
        densities: [d0, d1],
        priors: [counts[0] as f64 / total, counts[1] as f64 / total],
    })
}

impl BayesModel {
    pub fn priors(&self) -> [f64; 2] {
        self.priors
    }

    pub fn density(&self, class: u8) -> &Ensemble {
        &self.densities[class as usize]
    }

    /// `argmax_c π_c p̂_c(x)`, where each p̂_c is zero off its own support.
    /// When both scores vanish the larger prior wins; ties go to class 0.
    pub fn predict(&self, x: f64) -> u8 {
        let s0 = self.priors[0] * self.densities[0].density_or_zero(x);
        let s1 = self.priors[1] * self.densities[1].density_or_zero(x);
        if s0 == 0.0 && s1 == 0.0 {
            return u8::from(self.priors[1] > self.priors[0]);
        }
        u8::from(s1 > s0)
    }

    pub fn predict_many(&self, xs: &[f64]) -> Vec<u8> {
        xs.iter().map(|&x| self.predict(x)).collect()
    }

    pub fn error_rate(&self, data: &LabeledDataset) -> f64 {
        let wrong = data
            .features()
            .iter()
            .zip(data.labels())
            .filter(|(&x, &y)| self.predict(x) != y)
            .count();
        wrong as f64 / data.len() as f64
    }
}

pub fn predict(model: &BayesModel, x: f64) -> u8 {
    model.predict(x)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitConfig {
    pub splits: usize,
    pub train_fraction: f64,
    pub base_seed: u64,
    pub fit: FitConfig,
}

impl SplitConfig {
    pub fn new(splits: usize, train_fraction: f64, fit: FitConfig) -> Self {
        Self {
            splits,
            train_fraction,
            base_seed: 0,
            fit,
        }
    }

    pub fn split_seed(&self, split: usize) -> u64 {
        self.base_seed.wrapping_add(split as u64)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "kebab-case")]
pub enum SplitOutcome {
    Completed {
        split: usize,
        seed: u64,
        train_error: f64,
        test_error: f64,
    },
    Skipped {
        split: usize,
        seed: u64,
        reason: String,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitSummary {
    pub completed: usize,
    pub skipped: usize,
    pub train_mean: f64,
    pub train_sd: f64,
    pub test_mean: f64,
    pub test_sd: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitReport {
    pub outcomes: Vec<SplitOutcome>,
    pub summary: SplitSummary,
}

/// Training indices for one split: a seeded shuffle, first `round(frac · N)`.
pub fn split_indices(n: usize, train_fraction: f64, seed: u64) -> (Vec<usize>, Vec<usize>) {
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let n_train = ((train_fraction * n as f64).round() as usize).min(n);
    let test = idx.split_off(n_train);
    (idx, test)
}

fn run_split(data: &LabeledDataset, cfg: &SplitConfig, split: usize) -> Result<SplitOutcome> {
    let seed = cfg.split_seed(split);
    let (train_idx, test_idx) = split_indices(data.len(), cfg.train_fraction, seed);
    if train_idx.is_empty() || test_idx.is_empty() {
        return Ok(SplitOutcome::Skipped {
            split,
            seed,
            reason: "empty training or test set".into(),
        });
    }
    let train = data.subset(&train_idx)?;
    let test = data.subset(&test_idx)?;
    match fit_bayes(&train, &cfg.fit) {
        Ok(model) => Ok(SplitOutcome::Completed {
            split,
            seed,
            train_error: model.error_rate(&train),
            test_error: model.error_rate(&test),
        }),
        Err(e @ Error::InfeasibleClass { .. }) => Ok(SplitOutcome::Skipped {
            split,
            seed,
            reason: e.to_string(),
        }),
        Err(e) => Err(e),
    }
}

/// Repeated random train/test splits on the current rayon pool. Splits where
/// a class cannot be fitted are recorded as skipped rather than failing.
pub fn split_experiment(data: &LabeledDataset, cfg: &SplitConfig) -> Result<SplitReport> {
    if cfg.splits == 0 {
        return Err(Error::InvalidInput("need at least one split".into()));
    }
    if !(cfg.train_fraction > 0.0 && cfg.train_fraction < 1.0) {
        return Err(Error::InvalidInput(format!(
            "train fraction must lie in (0, 1), got {}",
            cfg.train_fraction
        )));
    }
    cfg.fit.learner.validate()?;
    let outcomes: Vec<SplitOutcome> = (0..cfg.splits)
        .into_par_iter()
        .map(|s| run_split(data, cfg, s))
        .collect::<Result<_>>()?;
    let (mut train, mut test) = (Vec::new(), Vec::new());
    for o in &outcomes {
        if let SplitOutcome::Completed {
            train_error,
            test_error,
            ..
        } = o
        {
            train.push(*train_error);
            test.push(*test_error);
        }
    }
    if train.is_empty() {
        return Err(Error::InvalidInput("every split was skipped".into()));
    }
    let (train_mean, train_sd) = mean_sd(&train);
    let (test_mean, test_sd) = mean_sd(&test);
    Ok(SplitReport {
        summary: SplitSummary {
            completed: train.len(),
            skipped: outcomes.len() - train.len(),
            train_mean,
            train_sd,
            test_mean,
            test_sd,
        },
        outcomes,
    })
}

/// Two Gaussian classes with a shared spread, with features rounded to a
/// fixed resolution so that the sample has a bounded number of distinct
/// values.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianTask {
    pub prior1: f64,
    pub mean0: f64,
    pub mean1: f64,
    pub sd: f64,
    pub resolution: f64,
}

impl Default for GaussianTask {
    fn default() -> Self {
        Self {
            prior1: 0.4,
            mean0: -1.0,
            mean1: 1.0,
            sd: 1.0,
            resolution: 0.1,
        }
    }
}

impl GaussianTask {
    fn round(&self, x: f64) -> f64 {
        (x / self.resolution).round() * self.resolution
    }

    pub fn sample(&self, n: usize, seed: u64) -> Result<LabeledDataset> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut features = Vec::with_capacity(n);
        let mut labels = Vec::with_capacity(n);
        for _ in 0..n {
            let y = u8::from(rng.random::<f64>() < self.prior1);
            let z: f64 = rng.sample(StandardNormal);
            let mu = if y == 1 { self.mean1 } else { self.mean0 };
            features.push(self.round(mu + self.sd * z));
            labels.push(y);
        }
        LabeledDataset::new(features, labels)
    }

    /// Exact Bayes error of the rounded feature: the sum over resolution bins
    /// of `min(π₀ P₀(bin), π₁ P₁(bin))`.
    pub fn bayes_error(&self) -> f64 {
        let n0 = Normal::new(self.mean0, self.sd).unwrap();
        let n1 = Normal::new(self.mean1, self.sd).unwrap();
        let reach = 12.0 * self.sd;
        let lo = ((self.mean0.min(self.mean1) - reach) / self.resolution).floor() as i64;
        let hi = ((self.mean0.max(self.mean1) + reach) / self.resolution).ceil() as i64;
        let h = 0.5 * self.resolution;
        (lo..=hi)
            .map(|k| {
                let c = k as f64 * self.resolution;
                let p0 = n0.cdf(c + h) - n0.cdf(c - h);
                let p1 = n1.cdf(c + h) - n1.cdf(c - h);
                ((1.0 - self.prior1) * p0).min(self.prior1 * p1)
            })
            .sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn task_data() -> LabeledDataset {
        GaussianTask::default().sample(300, 5).unwrap()
    }

    #[test]
    fn rejects_bad_labels_and_lengths() {
        assert!(LabeledDataset::new(vec![1.0, 2.0], vec![0]).is_err());
        assert!(matches!(
            LabeledDataset::new(vec![1.0, 2.0], vec![0, 2]),
            Err(Error::InvalidRow { row: 1, .. })
        ));
    }

    #[test]
    fn missing_class_is_infeasible() {
        let d = LabeledDataset::new((0..20).map(f64::from).collect(), vec![0; 20]).unwrap();
        let cfg = FitConfig::new(LearnerSpec::smooth_spline(), 3);
        assert!(matches!(
            fit_bayes(&d, &cfg),
            Err(Error::InfeasibleClass { class: 1, .. })
        ));
    }

    #[test]
    fn predictions_respect_supports_and_priors() {
        let d = task_data();
        let model = fit_bayes(&d, &FitConfig::new(LearnerSpec::smooth_spline(), 20)).unwrap();
        let (lo0, hi0) = model.density(0).support();
        let (lo1, hi1) = model.density(1).support();
        let priors = model.priors();
        assert!((priors[0] + priors[1] - 1.0).abs() < 1e-15);
        let far = 100.0 + hi0.max(hi1);
        assert_eq!(model.predict(far), u8::from(priors[1] > priors[0]));
        if hi1 > hi0 {
            assert_eq!(model.predict(0.5 * (hi0 + hi1)), 1);
        }
        if lo0 < lo1 {
            assert_eq!(model.predict(0.5 * (lo0 + lo1)), 0);
        }
        for x in model.density(0).knots() {
            assert!(model.predict(*x) <= 1);
        }
    }

    #[test]
    fn splits_are_reproducible() {
        let d = task_data();
        let cfg = SplitConfig::new(3, 0.7, FitConfig::new(LearnerSpec::smooth_spline(), 10));
        let a = split_experiment(&d, &cfg).unwrap();
        let b = split_experiment(&d, &cfg).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.summary.completed + a.summary.skipped, 3);
        let (tr, te) = split_indices(10, 0.75, 1);
        assert_eq!((tr.len(), te.len()), (8, 2));
    }

    #[test]
    fn bayes_error_matches_unrounded_limit() {
        // for a vanishing resolution the error tends to Φ(−1) π₁-weighted
        let task = GaussianTask {
            prior1: 0.5,
            resolution: 1e-3,
            ..Default::default()
        };
        let phi = Normal::new(0.0, 1.0).unwrap().cdf(-1.0);
        assert!((task.bayes_error() - phi).abs() < 1e-6);
    }
}
