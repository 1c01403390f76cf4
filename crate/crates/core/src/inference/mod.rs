//! Estimation of θ from counts, its sampling covariance, and confidence
//! intervals for bound endpoints.

mod covariance;
mod draws;
mod estimate;
mod interval;
mod normal;

pub(crate) use covariance::quadratic_form;
pub use covariance::{estimate_covariance, structural_covariance, CovarianceEstimate};
pub use draws::{gaussian_draws, GaussianSampler, PSD_SLACK};
pub use estimate::{ExperimentalCounts, ObservationalCounts, ThetaEstimate};
pub use interval::{
    confidence_intervals, default_tie_multiplier, directional_statistics, empirical_quantile, near_tie_diagnostic,
    numerical_delta_ci, smooth_ci, smooth_interval, CiMethod, DirectionalStatistics, EndpointDiagnostic,
    IntervalEstimate, MethodChoice, NearTieReport, NumericalDeltaConfig,
};
pub use normal::{normal_cdf, normal_quantile, two_sided_z};
