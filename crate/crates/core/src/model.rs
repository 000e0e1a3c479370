//! Versioned JSON persistence for fitted ensembles.
//!
//! The document holds the dataset snapshot (knots, frequencies, trapezoid
//! weights), the learner hyperparameters, one coefficient record per
//! boosting iteration, and the normalizer Z. Knots are stored once and
//! shared by every learner on load.

use std::io::{Read, Write};
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::boosting::Ensemble;
use crate::error::{Error, Result};
use crate::learners::{CartFit, CartNode, FittedLearner, KernelFit, LearnerSpec, SplineFit};
use crate::likelihood;

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub format_version: u32,
    pub sample_count: usize,
    pub knots: Vec<f64>,
    pub freqs: Vec<f64>,
    pub quadrature_weights: Vec<f64>,
    pub learner: LearnerSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bandwidth: Option<f64>,
    pub iterations: usize,
    pub normalizer: f64,
    pub learners: Vec<LearnerRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum LearnerRecord {
    SmoothSpline {
        values: Vec<f64>,
        second_derivs: Vec<f64>,
        lambda: Option<f64>,
        effective_df: f64,
    },
    GaussianKernel {
        intercept: f64,
        coefs: Vec<f64>,
        bandwidth: f64,
    },
    Cart {
        nodes: Vec<CartNode>,
    },
}

impl From<&FittedLearner> for LearnerRecord {
    fn from(l: &FittedLearner) -> Self {
        match l {
            FittedLearner::Spline(s) => LearnerRecord::SmoothSpline {
                values: s.values().to_vec(),
                second_derivs: s.second_derivs().to_vec(),
                lambda: s.lambda(),
                effective_df: s.effective_df(),
            },
            FittedLearner::Kernel(k) => LearnerRecord::GaussianKernel {
                intercept: k.intercept(),
                coefs: k.coefs().to_vec(),
                bandwidth: k.bandwidth(),
            },
            FittedLearner::Cart(c) => LearnerRecord::Cart {
                nodes: c.nodes().to_vec(),
            },
        }
    }
}

impl LearnerRecord {
    fn into_learner(self, knots: &Arc<[f64]>) -> Result<FittedLearner> {
        Ok(match self {
            LearnerRecord::SmoothSpline {
                values,
                second_derivs,
                lambda,
                effective_df,
            } => FittedLearner::Spline(SplineFit::from_parts(
                knots.clone(),
                values,
                second_derivs,
                lambda,
                effective_df,
            )?),
            LearnerRecord::GaussianKernel {
                intercept,
                coefs,
                bandwidth,
            } => FittedLearner::Kernel(KernelFit::from_parts(
                knots.clone(),
                intercept,
                coefs,
                bandwidth,
            )?),
            LearnerRecord::Cart { nodes } => FittedLearner::Cart(CartFit::from_nodes(nodes)?),
        })
    }
}

impl From<&Ensemble> for ModelFile {
    fn from(e: &Ensemble) -> Self {
        ModelFile {
            format_version: FORMAT_VERSION,
            sample_count: e.sample_count,
            knots: e.knots.to_vec(),
            freqs: e.freqs.clone(),
            quadrature_weights: e.quad.clone(),
            learner: e.spec,
            bandwidth: e.bandwidth,
            iterations: e.learners.len(),
            normalizer: e.normalizer,
            learners: e.learners.iter().map(LearnerRecord::from).collect(),
        }
    }
}

impl TryFrom<ModelFile> for Ensemble {
    type Error = Error;

    fn try_from(m: ModelFile) -> Result<Self> {
        if m.format_version != FORMAT_VERSION {
            return Err(Error::UnsupportedVersion(m.format_version));
        }
        let n = m.knots.len();
        if n < 2 || m.freqs.len() != n || m.quadrature_weights.len() != n {
            return Err(Error::InvalidInput(
                "model snapshot arrays have inconsistent lengths".into(),
            ));
        }
        if m.learners.len() != m.iterations {
            return Err(Error::InvalidInput(format!(
                "model declares {} iterations but stores {} learners",
                m.iterations,
                m.learners.len()
            )));
        }
        crate::learners::check_knots(&m.knots)?;
        m.learner.validate()?;
        let knots: Arc<[f64]> = m.knots.into();
        let learners = m
            .learners
            .into_iter()
            .map(|r| r.into_learner(&knots))
            .collect::<Result<Vec<_>>>()?;
        let ens = Ensemble {
            knots,
            freqs: m.freqs,
            quad: m.quadrature_weights,
            sample_count: m.sample_count,
            spec: m.learner,
            bandwidth: m.bandwidth,
            learners,
            normalizer: m.normalizer,
        };
        let z = likelihood::normalizer(&ens.quad, ens.f_at_knots().values())?;
        if !((z - ens.normalizer).abs() <= 1e-9 * z) {
            return Err(Error::InvalidInput(format!(
                "stored normalizer {} disagrees with recomputed {z}",
                ens.normalizer
            )));
        }
        Ok(ens)
    }
}

pub fn to_writer<W: Write>(ens: &Ensemble, writer: W) -> Result<()> {
    serde_json::to_writer_pretty(writer, &ModelFile::from(ens))?;
    Ok(())
}

pub fn from_reader<R: Read>(reader: R) -> Result<Ensemble> {
    let file: ModelFile = serde_json::from_reader(reader)?;
    file.try_into()
}

pub fn save(ens: &Ensemble, path: impl AsRef<Path>) -> Result<()> {
    let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
    to_writer(ens, &mut w)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

pub fn load(path: impl AsRef<Path>) -> Result<Ensemble> {
    from_reader(std::io::BufReader::new(std::fs::File::open(path)?))
}
