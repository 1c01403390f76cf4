//! Experimental and observational sample sizes for a target margin of error.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::bounds::{AffineBoundForm, Endpoint, DEFAULT_TIE_TOLERANCE};
use crate::error::{Error, Result};
use crate::inference::{quadratic_form, structural_covariance, two_sided_z};
use crate::theta::{Theta, ThetaLayout};

/// Sample size needed by an approach based on experimental data alone at the
/// same margin of error and level (ε = 0.05, α = 0.05).
pub const REFERENCE_SAMPLE_SIZE: u64 = 6147;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PlanMethod {
    WorstCase,
    VarianceBased,
}

impl PlanMethod {
    pub fn as_str(self) -> &'static str {
        match self {
            PlanMethod::WorstCase => "worst-case",
            PlanMethod::VarianceBased => "variance-based",
        }
    }
}

impl fmt::Display for PlanMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PlanMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "worstcase" | "worst-case" => Ok(PlanMethod::WorstCase),
            "variance" | "variance-based" => Ok(PlanMethod::VarianceBased),
            other => Err(Error::param("method", format!("unknown plan method `{other}`"))),
        }
    }
}

/// A sample-size recommendation, serialized as a flat record.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SampleSizePlan {
    pub epsilon: f64,
    pub alpha: f64,
    /// `r = m / n`.
    pub ratio: f64,
    pub z: f64,
    /// Experimental size.
    pub m: u64,
    /// Observational size.
    pub n: u64,
    pub method: PlanMethod,
    /// Share of the experimental sample assigned to treatment.
    pub arm_fraction: f64,
    /// `(z / ε)²`.
    pub base_factor: f64,
}

impl SampleSizePlan {
    /// `m` relative to [`REFERENCE_SAMPLE_SIZE`].
    pub fn reference_ratio(&self) -> f64 {
        self.m as f64 / REFERENCE_SAMPLE_SIZE as f64
    }
}

fn check_common(epsilon: f64, alpha: f64, r: f64) -> Result<f64> {
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::param("epsilon", format!("{epsilon} is not in (0, 1)")));
    }
    if !(r > 0.0 && r.is_finite()) {
        return Err(Error::param("ratio", format!("{r} must be positive")));
    }
    two_sided_z(alpha)
}

/// Closed-form plan with every binomial variance at its maximum 1/4 and an
/// even split of the experimental sample:
/// `m = ceil((1 + 1/(4r)) (z/ε)²)`, `n = ceil(m / r)`.
pub fn worst_case_plan(epsilon: f64, alpha: f64, r: f64) -> Result<SampleSizePlan> {
    let z = check_common(epsilon, alpha, r)?;
    let base = (z / epsilon).powi(2);
    let m = ((1.0 + 1.0 / (4.0 * r)) * base).ceil().max(1.0) as u64;
    let n = (m as f64 / r).ceil().max(1.0) as u64;
    Ok(SampleSizePlan {
        epsilon,
        alpha,
        ratio: r,
        z,
        m,
        n,
        method: PlanMethod::WorstCase,
        arm_fraction: 0.5,
        base_factor: base,
    })
}

/// How the experimental sample is split between arms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CovarianceModel {
    pub arm_fraction: f64,
}

impl Default for CovarianceModel {
    fn default() -> Self {
        Self { arm_fraction: 0.5 }
    }
}

/// Plan from the endpoint variances at a pilot θ: the smallest `n` with
/// `z · SE(n) <= ε` at both endpoints, where the experimental size is `r·n`.
pub fn variance_based_plan(
    form: &AffineBoundForm,
    pilot: &Theta,
    model: CovarianceModel,
    epsilon: f64,
    alpha: f64,
    r: f64,
) -> Result<SampleSizePlan> {
    let z = check_common(epsilon, alpha, r)?;
    let f = model.arm_fraction;
    if !(f > 0.0 && f < 1.0) {
        return Err(Error::param("arm_fraction", format!("{f} is not in (0, 1)")));
    }
    let standard = ThetaLayout::standard();
    let pilot = if pilot.layout().is_standard() {
        pilot.clone()
    } else {
        let values = standard
            .symbols()
            .iter()
            .map(|s| pilot.layout().require(s).map(|i| pilot.values()[i]))
            .collect::<Result<Vec<_>>>()?;
        Theta::new(standard.clone(), values)?
    };
    let form = form.remap(&standard)?;
    let x = pilot.values();

    // Variance with n = 1; it scales as 1/n.
    let unit_cov = structural_covariance(x, f * r, (1.0 - f) * r, 1.0);
    let mut unit_var: f64 = 0.0;
    for endpoint in Endpoint::BOTH {
        let g = form
            .endpoint_gradient_raw(x, endpoint, DEFAULT_TIE_TOLERANCE)
            .map_err(|e| match e {
                Error::NonSmoothEndpoint { endpoint, active } => Error::InvalidParameter {
                    name: "pilot",
                    reason: format!(
                        "{endpoint} endpoint has {active} tied terms at the pilot; use the worst-case plan"
                    ),
                },
                other => other,
            })?;
        unit_var = unit_var.max(quadratic_form(&unit_cov, &g));
    }

    let base = (z / epsilon).powi(2);
    let meets = |n: u64| z * (unit_var / n as f64).sqrt() <= epsilon;
    let mut n = (unit_var * base).ceil().max(1.0) as u64;
    while !meets(n) {
        n += 1;
    }
    while n > 1 && meets(n - 1) {
        n -= 1;
    }
    let m = (r * n as f64).ceil().max(1.0) as u64;
    Ok(SampleSizePlan {
        epsilon,
        alpha,
        ratio: r,
        z,
        m,
        n,
        method: PlanMethod::VarianceBased,
        arm_fraction: f,
        base_factor: base,
    })
}
