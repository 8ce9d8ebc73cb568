use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("degenerate sample: {0}")]
    DegenerateSample(String),

    /// The weight is (empirically) uncorrelated with Y, so the weighted-Gini
    /// denominator vanishes.
    #[error("degenerate weight: {0}")]
    DegenerateWeight(String),

    #[error("numeric quality: {0}")]
    NumericQuality(String),

    #[error("assumption {condition} violated: {detail}")]
    AssumptionViolation { condition: String, detail: String },

    #[error("unstable bootstrap: {failures} of {replicates} resamples were degenerate")]
    UnstableBootstrap { failures: usize, replicates: usize },

    #[error("internal inconsistency: {0}")]
    InternalInconsistency(String),
}

impl Error {
    /// Stable machine-readable tag.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidParameter(_) => "invalid-parameter",
            Error::DegenerateSample(_) => "degenerate-sample",
            Error::DegenerateWeight(_) => "degenerate-weight",
            Error::NumericQuality(_) => "numeric-quality",
            Error::AssumptionViolation { .. } => "assumption-violation",
            Error::UnstableBootstrap { .. } => "unstable-bootstrap",
            Error::InternalInconsistency(_) => "internal-inconsistency",
        }
    }

    /// Failures a bootstrap or Monte Carlo loop may skip and count.
    pub fn is_degenerate(&self) -> bool {
        matches!(self, Error::DegenerateSample(_) | Error::DegenerateWeight(_))
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
