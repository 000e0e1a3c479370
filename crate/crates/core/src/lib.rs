//! Boosted nonparametric maximum likelihood density estimation on the line.
//!
//! A density is modelled in Gibbs form `p̂(x) = e^{f(x)} / Z` on the sample
//! range, with the log-potential `f` grown as a sum of heavily smoothed weak
//! learners. Each boosting step maximizes a second-order expansion of a
//! surrogate log-likelihood, which reduces to a weighted least squares fit.
//!
//! ```no_run
//! use npmle_boost::{fit_samples, FitConfig, LearnerSpec, RawSamples};
//!
//! let raw = RawSamples::new(vec![0.1, 0.4, 0.4, 0.9, 1.3, 2.0, 2.6])?;
//! let (ensemble, _) = fit_samples(&raw, &FitConfig::new(LearnerSpec::smooth_spline(), 200))?;
//! let p = ensemble.density(1.0)?;
//! # Ok::<(), npmle_boost::Error>(())
//! ```

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod boosting;
pub mod classify;
pub mod cli;
pub mod data;
pub mod error;
pub mod io;
pub mod learners;
pub mod likelihood;
pub mod model;
pub mod sim;

pub use boosting::{fit, fit_samples, Ensemble, FitConfig, FitTrace, TraceRecord};
pub use data::{build_dataset, trapezoid_weights, Dataset, QuadratureWeights, RawSamples};
pub use error::{Error, Result};
pub use learners::{Bandwidth, FittedLearner, LearnerKind, LearnerSpec};
pub use likelihood::KnotFunction;
pub use sim::DistributionSpec;

