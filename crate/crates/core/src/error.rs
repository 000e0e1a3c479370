use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("invalid input at row {row}: {message}")]
    InvalidRow { row: usize, message: String },

    #[error("degenerate support: {0}")]
    DegenerateSupport(String),

    #[error("degenerate spread: sample standard deviation is zero")]
    DegenerateSpread,

    #[error("numerical range exceeded: {0}")]
    NumericalRange(String),

    #[error("weight underflow at knot {knot} (weight {weight:e})")]
    WeightUnderflow { knot: usize, weight: f64 },

    #[error("infeasible degrees of freedom: df={df} with {n} knots (need 2 <= df <= n and n >= 4)")]
    InfeasibleDf { df: f64, n: usize },

    #[error("smoothing parameter search failed: {0}")]
    SearchFailure(String),

    #[error("linear solve failed: {0}")]
    SolveFailure(String),

    #[error("x = {x} lies outside the support [{lo}, {hi}]")]
    OutOfSupport { x: f64, lo: f64, hi: f64 },

    #[error("invalid distribution: {0}")]
    InvalidSpec(String),

    #[error("class {class} cannot be fitted: {reason}")]
    InfeasibleClass { class: u8, reason: String },

    #[error("boosting iteration {iteration}: {source}")]
    AtIteration {
        iteration: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("sweep cell beta={beta}, M={m}, replicate={replicate}: {source}")]
    AtSweepCell {
        beta: f64,
        m: usize,
        replicate: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("unsupported model format version {0}")]
    UnsupportedVersion(u32),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn at_iteration(self, iteration: usize) -> Self {
        Error::AtIteration {
            iteration,
            source: Box::new(self),
        }
    }

    /// True for failures that come from the numerics rather than from bad input.
    pub fn is_numerical(&self) -> bool {
        match self {
            Error::NumericalRange(_)
            | Error::WeightUnderflow { .. }
            | Error::SearchFailure(_)
            | Error::SolveFailure(_) => true,
            Error::AtIteration { source, .. } | Error::AtSweepCell { source, .. } => {
                source.is_numerical()
            }
            _ => false,
        }
    }
}
