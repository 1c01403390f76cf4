//! Error type shared by every module of the crate.

use std::path::PathBuf;

use thiserror::Error;

use crate::bounds::Endpoint;

/// Convenience alias used throughout the crate.
pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// A symbol required by an operation is missing from the layout, or two
    /// objects address incompatible layouts.
    #[error("layout error: {0}")]
    Layout(String),

    /// A probability vector violates its invariants.
    #[error("invalid theta: {0}")]
    InvalidTheta(String),

    /// A scalar argument is outside its admissible range.
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("denominator `{symbol}` = {value:e} is not above the floor {floor:e}")]
    DegenerateDenominator { symbol: String, value: f64, floor: f64 },

    #[error(
        "{endpoint} endpoint is not smooth ({active} tied terms); \
         use generalized gradients or the numerical delta method"
    )]
    NonSmoothEndpoint { endpoint: Endpoint, active: usize },

    #[error("covariance matrix is not positive semidefinite (eigenvalue {eigenvalue:e})")]
    NotPositiveSemidefinite { eigenvalue: f64 },

    #[error(
        "perturbed estimates hit the denominator floor too often ({attempts} attempts for {accepted} accepted draws)"
    )]
    NearBoundary { attempts: usize, accepted: usize },

    #[error("theta is inconsistent with any structural model: {0}")]
    Infeasible(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// True for failures caused by the numbers themselves (degenerate
    /// denominators, ties, non-PSD covariances, ...) rather than by malformed
    /// input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::DegenerateDenominator { .. }
                | Error::NonSmoothEndpoint { .. }
                | Error::NotPositiveSemidefinite { .. }
                | Error::NearBoundary { .. }
                | Error::Infeasible(_)
        )
    }

    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
