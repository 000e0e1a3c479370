//! Ground-truth distributions, seeded sampling, KL evaluation and the
//! mixture-weight sweep.
//!
//! Sampling uses ChaCha8 (`rand_chacha::ChaCha8Rng::seed_from_u64`), which
//! produces the same stream on every platform. Each replicate of a sweep
//! uses seed `base_seed + replicate`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, StandardNormal, StudentT};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{Continuous, ContinuousCDF};

use crate::boosting::{fit_samples, uniform_grid, Ensemble, FitConfig};
use crate::data::RawSamples;
use crate::error::{Error, Result};
use crate::learners::LearnerSpec;

pub const DEFAULT_KL_GRID: usize = 2001;
const DENSITY_FLOOR: f64 = 1e-300;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case")]
pub enum DistributionSpec {
    Uniform {
        lo: f64,
        hi: f64,
    },
    Exponential {
        rate: f64,
    },
    /// `weight · Laplace(loc1, scale1) + (1 − weight) · Laplace(loc2, scale2)`.
    LaplaceMixture {
        weight: f64,
        loc1: f64,
        scale1: f64,
        loc2: f64,
        scale2: f64,
    },
    StudentT {
        nu: f64,
    },
    /// `β · N(μ₁, σ²) + (1 − β) · N(μ₂, σ²)`.
    Gmm {
        beta: f64,
        mu1: f64,
        mu2: f64,
        var: f64,
    },
}

impl DistributionSpec {
    pub fn uniform() -> Self {
        DistributionSpec::Uniform { lo: 0.0, hi: 1.0 }
    }

    pub fn exponential() -> Self {
        DistributionSpec::Exponential { rate: 1.0 }
    }

    /// Symmetric pair of Laplace bumps at ±2 with unit scale.
    pub fn laplace_mixture() -> Self {
        DistributionSpec::LaplaceMixture {
            weight: 0.5,
            loc1: -2.0,
            scale1: 1.0,
            loc2: 2.0,
            scale2: 1.0,
        }
    }

    pub fn student_t() -> Self {
        DistributionSpec::StudentT { nu: 3.0 }
    }

    /// Two Gaussians at ±2.5 with variance 2; `beta` weights the one at +2.5.
    pub fn gmm(beta: f64) -> Self {
        DistributionSpec::Gmm {
            beta,
            mu1: 2.5,
            mu2: -2.5,
            var: 2.0,
        }
    }

    /// The four shapes of the fitting study, from discontinuous to heavy tailed.
    pub fn fitting_study() -> [(&'static str, DistributionSpec); 4] {
        [
            ("uniform", Self::uniform()),
            ("exponential", Self::exponential()),
            ("laplace-mixture", Self::laplace_mixture()),
            ("student-t", Self::student_t()),
        ]
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidSpec(msg));
        let finite = |v: &[f64]| v.iter().all(|x| x.is_finite());
        match *self {
            DistributionSpec::Uniform { lo, hi } if !(finite(&[lo, hi]) && lo < hi) => {
                bad(format!("uniform needs lo < hi, got [{lo}, {hi}]"))
            }
            DistributionSpec::Exponential { rate } if !(rate > 0.0 && rate.is_finite()) => {
                bad(format!("exponential rate must be positive, got {rate}"))
            }
            DistributionSpec::LaplaceMixture {
                weight,
                loc1,
                scale1,
                loc2,
                scale2,
            } if !((0.0..=1.0).contains(&weight)
                && finite(&[loc1, loc2, scale1, scale2])
                && scale1 > 0.0
                && scale2 > 0.0) =>
            {
                bad("laplace mixture needs weight in [0,1] and positive scales".into())
            }
            DistributionSpec::StudentT { nu } if !(nu > 0.0 && nu.is_finite()) => {
                bad(format!("student-t degrees of freedom must be positive, got {nu}"))
            }
            DistributionSpec::Gmm {
                beta,
                mu1,
                mu2,
                var,
            } if !((0.0..=1.0).contains(&beta) && finite(&[mu1, mu2, var]) && var > 0.0) => {
                bad("gmm needs beta in [0,1] and positive variance".into())
            }
            _ => Ok(()),
        }
    }

    pub fn sample(&self, n: usize, seed: u64) -> Result<RawSamples> {
        self.validate()?;
        if n == 0 {
            return Err(Error::InvalidSpec("sample size must be positive".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let values: Vec<f64> = match *self {
            DistributionSpec::Uniform { lo, hi } => (0..n)
                .map(|_| lo + (hi - lo) * rng.random::<f64>())
                .collect(),
            DistributionSpec::Exponential { rate } => {
                let d = Exp::new(rate).map_err(|e| Error::InvalidSpec(e.to_string()))?;
                (0..n).map(|_| d.sample(&mut rng)).collect()
            }
            DistributionSpec::LaplaceMixture {
                weight,
                loc1,
                scale1,
                loc2,
                scale2,
            } => (0..n)
                .map(|_| {
                    let first = rng.random::<f64>() < weight;
                    let magnitude: f64 = Exp::new(1.0).unwrap().sample(&mut rng);
                    let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
                    let (loc, scale) = if first { (loc1, scale1) } else { (loc2, scale2) };
                    loc + sign * scale * magnitude
                })
                .collect(),
            DistributionSpec::StudentT { nu } => {
                let d = StudentT::new(nu).map_err(|e| Error::InvalidSpec(e.to_string()))?;
                (0..n).map(|_| d.sample(&mut rng)).collect()
            }
            DistributionSpec::Gmm {
                beta,
                mu1,
                mu2,
                var,
            } => {
                let sd = var.sqrt();
                (0..n)
                    .map(|_| {
                        let first = rng.random::<f64>() < beta;
                        let z: f64 = StandardNormal.sample(&mut rng);
                        (if first { mu1 } else { mu2 }) + sd * z
                    })
                    .collect()
            }
        };
        RawSamples::new(values)
    }

    pub fn pdf(&self, x: f64) -> f64 {
        use statrs::distribution as sd;
        match *self {
            DistributionSpec::Uniform { lo, hi } => {
                if (lo..=hi).contains(&x) {
                    1.0 / (hi - lo)
                } else {
                    0.0
                }
            }
            DistributionSpec::Exponential { rate } => sd::Exp::new(rate).map_or(0.0, |d| d.pdf(x)),
            DistributionSpec::LaplaceMixture {
                weight,
                loc1,
                scale1,
                loc2,
                scale2,
            } => {
                weight * laplace_pdf(x, loc1, scale1) + (1.0 - weight) * laplace_pdf(x, loc2, scale2)
            }
            DistributionSpec::StudentT { nu } => {
                sd::StudentsT::new(0.0, 1.0, nu).map_or(0.0, |d| d.pdf(x))
            }
            DistributionSpec::Gmm {
                beta,
                mu1,
                mu2,
                var,
            } => beta * normal_pdf(x, mu1, var) + (1.0 - beta) * normal_pdf(x, mu2, var),
        }
    }

    pub fn cdf(&self, x: f64) -> f64 {
        use statrs::distribution as sd;
        match *self {
            DistributionSpec::Uniform { lo, hi } => ((x - lo) / (hi - lo)).clamp(0.0, 1.0),
            DistributionSpec::Exponential { rate } => sd::Exp::new(rate).map_or(0.0, |d| d.cdf(x)),
            DistributionSpec::LaplaceMixture {
                weight,
                loc1,
                scale1,
                loc2,
                scale2,
            } => {
                let c = |loc, scale| sd::Laplace::new(loc, scale).map_or(0.0, |d| d.cdf(x));
                weight * c(loc1, scale1) + (1.0 - weight) * c(loc2, scale2)
            }
            DistributionSpec::StudentT { nu } => {
                sd::StudentsT::new(0.0, 1.0, nu).map_or(0.0, |d| d.cdf(x))
            }
            DistributionSpec::Gmm {
                beta,
                mu1,
                mu2,
                var,
            } => {
                let c = |mu| sd::Normal::new(mu, var.sqrt()).map_or(0.0, |d| d.cdf(x));
                beta * c(mu1) + (1.0 - beta) * c(mu2)
            }
        }
    }

    /// Probability mass outside `[lo, hi]`.
    pub fn mass_outside(&self, lo: f64, hi: f64) -> f64 {
        (self.cdf(lo) + (1.0 - self.cdf(hi))).max(0.0)
    }
}

/// `φ(x; μ, σ²)`.
pub fn normal_pdf(x: f64, mu: f64, var: f64) -> f64 {
    (-(x - mu) * (x - mu) / (2.0 * var)).exp() / (2.0 * std::f64::consts::PI * var).sqrt()
}

fn laplace_pdf(x: f64, loc: f64, scale: f64) -> f64 {
    (-(x - loc).abs() / scale).exp() / (2.0 * scale)
}

pub fn sample(spec: &DistributionSpec, n: usize, seed: u64) -> Result<RawSamples> {
    spec.sample(n, seed)
}

pub fn pdf_true(spec: &DistributionSpec, x: f64) -> f64 {
    spec.pdf(x)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KlResult {
    /// `∫ p log(p / p̂) − p + p̂` over the support. Every point of the
    /// integrand is non-negative, so truncating `p` cannot make it negative.
    pub kl: f64,
    /// The bare `∫ p log(p / p̂)` over the support. Can dip below zero when
    /// `p` has mass outside it.
    pub log_ratio: f64,
    /// Mass of the true density outside the estimate's support, which the
    /// integral does not see.
    pub truncated_mass: f64,
    pub lo: f64,
    pub hi: f64,
    pub grid_size: usize,
}

/// Both KL integrals of [`KlResult`] by the trapezoid rule on a uniform grid
/// over `[lo, hi]`, returned as `(kl, log_ratio)`.
///
/// `q` is floored at 1e-300; points where `p < 1e-300` contribute only `q`.
pub fn kl_parts(
    p: impl Fn(f64) -> f64,
    q: impl Fn(f64) -> f64,
    lo: f64,
    hi: f64,
    grid_size: usize,
) -> Result<(f64, f64)> {
    if grid_size < 2 || !(lo < hi) {
        return Err(Error::InvalidInput(format!(
            "KL grid needs at least 2 points on a non-empty interval, got {grid_size} on [{lo}, {hi}]"
        )));
    }
    let step = (hi - lo) / (grid_size - 1) as f64;
    let (mut kl, mut log_ratio) = (0.0, 0.0);
    for (i, x) in uniform_grid((lo, hi), grid_size).enumerate() {
        let px = p(x);
        let qx = q(x).max(DENSITY_FLOOR);
        let lr = if px < DENSITY_FLOOR { 0.0 } else { px * (px / qx).ln() };
        let end = if i == 0 || i + 1 == grid_size { 0.5 } else { 1.0 };
        log_ratio += end * lr;
        kl += end * if px < DENSITY_FLOOR { qx } else { (lr - px + qx).max(0.0) };
    }
    Ok((kl * step, log_ratio * step))
}

/// Generalized KL `∫ p log(p / q) − p + q` over `[lo, hi]`; see [`kl_parts`].
pub fn kl_on_interval(
    p: impl Fn(f64) -> f64,
    q: impl Fn(f64) -> f64,
    lo: f64,
    hi: f64,
    grid_size: usize,
) -> Result<f64> {
    kl_parts(p, q, lo, hi, grid_size).map(|(kl, _)| kl)
}

/// KL divergence from the true distribution to a fitted ensemble, integrated
/// over the ensemble's support.
pub fn kl_divergence(spec: &DistributionSpec, ens: &Ensemble, grid_size: usize) -> Result<KlResult> {
    if grid_size < 101 {
        return Err(Error::InvalidInput(format!(
            "KL grid_size must be at least 101, got {grid_size}"
        )));
    }
    spec.validate()?;
    let (lo, hi) = ens.support();
    let compiled = ens.compiled();
    let z = ens.normalizer();
    let (kl, log_ratio) = kl_parts(|x| spec.pdf(x), |x| compiled.f(x).exp() / z, lo, hi, grid_size)?;
    Ok(KlResult {
        kl,
        log_ratio,
        truncated_mass: spec.mass_outside(lo, hi),
        lo,
        hi,
        grid_size,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub betas: Vec<f64>,
    pub iterations: Vec<usize>,
    pub replicates: usize,
    pub sample_size: usize,
    pub learner: LearnerSpec,
    pub base_seed: u64,
    pub grid_size: usize,
}

impl SweepConfig {
    pub fn new(betas: Vec<f64>, iterations: Vec<usize>, replicates: usize, learner: LearnerSpec) -> Self {
        Self {
            betas,
            iterations,
            replicates,
            sample_size: 500,
            learner,
            base_seed: 0,
            grid_size: DEFAULT_KL_GRID,
        }
    }

    pub fn replicate_seed(&self, replicate: usize) -> u64 {
        self.base_seed.wrapping_add(replicate as u64)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepCell {
    pub beta: f64,
    pub m: usize,
    pub replicate: usize,
    pub seed: u64,
    pub kl: f64,
    pub truncated_mass: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepAggregate {
    pub beta: f64,
    pub m: usize,
    pub count: usize,
    pub mean: f64,
    pub sd: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub cells: Vec<SweepCell>,
    pub aggregates: Vec<SweepAggregate>,
}

impl SweepResult {
    pub fn aggregate(&self, beta: f64, m: usize) -> Option<&SweepAggregate> {
        self.aggregates.iter().find(|a| a.beta == beta && a.m == m)
    }
}

/// Mean and sample standard deviation (zero for a single value).
pub fn mean_sd(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

fn sweep_replicate(cfg: &SweepConfig, beta: f64, replicate: usize, max_m: usize) -> Result<Vec<SweepCell>> {
    let seed = cfg.replicate_seed(replicate);
    let spec = DistributionSpec::gmm(beta);
    let at = |m: usize| {
        move |e: Error| Error::AtSweepCell {
            beta,
            m,
            replicate,
            source: Box::new(e),
        }
    };
    let raw = spec.sample(cfg.sample_size, seed).map_err(at(0))?;
    let fit_cfg = FitConfig::new(cfg.learner, max_m).with_trace();
    let (ens, trace) = fit_samples(&raw, &fit_cfg).map_err(at(max_m))?;
    cfg.iterations
        .iter()
        .map(|&m| {
            let prefix = ens.prefix_with_normalizer(m, trace.records[m].normalizer);
            let r = kl_divergence(&spec, &prefix, cfg.grid_size).map_err(at(m))?;
            Ok(SweepCell {
                beta,
                m,
                replicate,
                seed,
                kl: r.kl,
                truncated_mass: r.truncated_mass,
            })
        })
        .collect()
}

/// KL of boosted fits over a grid of mixture weights and iteration counts.
///
/// Each (β, replicate) pair is fitted once at the largest M; smaller M values
/// are read off the same boosting path. Replicates run on the current rayon
/// pool; results are ordered by β, then replicate, then M.
pub fn kl_sweep(cfg: &SweepConfig) -> Result<SweepResult> {
    if cfg.betas.is_empty() || cfg.iterations.is_empty() || cfg.replicates == 0 {
        return Err(Error::InvalidInput(
            "sweep needs at least one beta, one M and one replicate".into(),
        ));
    }
    if cfg.iterations.contains(&0) {
        return Err(Error::InvalidInput("M values must be positive".into()));
    }
    for &beta in &cfg.betas {
        DistributionSpec::gmm(beta).validate()?;
    }
    let max_m = *cfg.iterations.iter().max().unwrap();
    let jobs: Vec<(f64, usize)> = cfg
        .betas
        .iter()
        .flat_map(|&b| (0..cfg.replicates).map(move |r| (b, r)))
        .collect();
    let per_job: Vec<Vec<SweepCell>> = jobs
        .par_iter()
        .map(|&(beta, rep)| sweep_replicate(cfg, beta, rep, max_m))
        .collect::<Result<_>>()?;
    let cells: Vec<SweepCell> = per_job.into_iter().flatten().collect();

    let mut aggregates = Vec::new();
    for &beta in &cfg.betas {
        for &m in &cfg.iterations {
            let kls: Vec<f64> = cells
                .iter()
                .filter(|c| c.beta == beta && c.m == m)
                .map(|c| c.kl)
                .collect();
            let (mean, sd) = mean_sd(&kls);
            aggregates.push(SweepAggregate {
                beta,
                m,
                count: kls.len(),
                mean,
                sd,
            });
        }
    }
    Ok(SweepResult { cells, aggregates })
}
