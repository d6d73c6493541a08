//! Error type shared by the whole pipeline.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Bad configuration or bad argument values caught at the API boundary.
    #[error("invalid config: {0}")]
    InvalidConfig(String),

    /// Shape or layout mismatch between tensors, parameter vectors, or batches.
    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("empty batch")]
    EmptyBatch,

    /// A NaN or infinity appeared mid-computation. The message carries the
    /// step/model context so the failing run can be located.
    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("feature {0} has zero variance; cannot standardize")]
    ZeroVariance(usize),

    #[error("csv: {0}")]
    Csv(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for errors a caller caused (bad config, bad shapes, bad files).
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::InvalidConfig(_)
                | Error::Shape(_)
                | Error::EmptyBatch
                | Error::ZeroVariance(_)
                | Error::Csv(_)
        )
    }

    /// True when a numerical abort (NaN/Inf) stopped a run.
    pub fn is_numerical(&self) -> bool {
        matches!(self, Error::NonFinite(_))
    }
}

pub(crate) fn shape_err(what: impl Into<String>) -> Error {
    Error::Shape(what.into())
}
