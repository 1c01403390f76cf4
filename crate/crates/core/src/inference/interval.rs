use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::covariance::{estimate_covariance, CovarianceEstimate};
use super::draws::GaussianSampler;
use super::normal::two_sided_z;
use super::ThetaEstimate;
use crate::bounds::{AffineBoundForm, Endpoint, DEFAULT_TIE_TOLERANCE};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CiMethod {
    #[serde(rename = "smooth-delta")]
    SmoothDelta,
    #[serde(rename = "numerical-delta")]
    NumericalDelta,
}

impl CiMethod {
    pub fn as_str(self) -> &'static str {
        match self {
            CiMethod::SmoothDelta => "smooth-delta",
            CiMethod::NumericalDelta => "numerical-delta",
        }
    }
}

impl fmt::Display for CiMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A confidence interval for one bound endpoint.
///
/// Serializes as the flat record
/// `{endpoint, method, point, se, ci_low, ci_high, alpha, B, epsilon_n, seed}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntervalEstimate {
    pub endpoint: Endpoint,
    pub method: CiMethod,
    pub point: f64,
    /// Standard error; only the smooth method has one.
    pub se: Option<f64>,
    pub ci_low: f64,
    pub ci_high: f64,
    pub alpha: f64,
    #[serde(rename = "B")]
    pub draws: Option<usize>,
    pub epsilon_n: Option<f64>,
    pub seed: Option<u64>,
}

impl IntervalEstimate {
    pub fn contains(&self, value: f64) -> bool {
        self.ci_low <= value && value <= self.ci_high
    }

    pub fn width(&self) -> f64 {
        self.ci_high - self.ci_low
    }
}

/// Settings for the numerical directional delta method.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NumericalDeltaConfig {
    /// Finite-difference step; `None` means `n^{-1/4}`.
    pub epsilon_n: Option<f64>,
    /// Number of Gaussian draws `B`.
    pub draws: usize,
    pub seed: u64,
}

impl Default for NumericalDeltaConfig {
    fn default() -> Self {
        Self {
            epsilon_n: None,
            draws: 1000,
            seed: 0,
        }
    }
}

impl NumericalDeltaConfig {
    pub fn with_seed(seed: u64) -> Self {
        Self {
            seed,
            ..Self::default()
        }
    }

    pub fn step(&self, n: u64) -> Result<f64> {
        let eps = self.epsilon_n.unwrap_or_else(|| (n as f64).powf(-0.25));
        if !(eps > 0.0 && eps.is_finite()) {
            return Err(Error::param("epsilon_n", format!("{eps} must be positive")));
        }
        if self.draws < 2 {
            return Err(Error::param("B", "at least two draws are required"));
        }
        Ok(eps)
    }
}

/// Empirical quantile with linear interpolation between order statistics
/// (`sorted` must be ascending and non-empty).
pub fn empirical_quantile(sorted: &[f64], tau: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * tau.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

fn standardized_form(form: &AffineBoundForm, est: &ThetaEstimate) -> Result<AffineBoundForm> {
    form.remap(est.theta().layout())
}

/// Delta-method interval for one endpoint. Fails with
/// [`Error::NonSmoothEndpoint`] when the endpoint is tied at `tie_tolerance`.
pub fn smooth_interval(
    form: &AffineBoundForm,
    est: &ThetaEstimate,
    alpha: f64,
    endpoint: Endpoint,
    tie_tolerance: f64,
) -> Result<IntervalEstimate> {
    let form = standardized_form(form, est)?;
    let cov = estimate_covariance(est)?;
    smooth_interval_with(&form, est.theta().values(), &cov, alpha, endpoint, tie_tolerance)
}

fn smooth_interval_with(
    form: &AffineBoundForm,
    x: &[f64],
    cov: &CovarianceEstimate,
    alpha: f64,
    endpoint: Endpoint,
    tie_tolerance: f64,
) -> Result<IntervalEstimate> {
    let z = two_sided_z(alpha)?;
    let grad = form.endpoint_gradient_raw(x, endpoint, tie_tolerance)?;
    let point = form.evaluate_endpoint_raw(x, endpoint)?;
    let se = cov.quadratic_form(&grad).max(0.0).sqrt();
    Ok(IntervalEstimate {
        endpoint,
        method: CiMethod::SmoothDelta,
        point,
        se: Some(se),
        ci_low: point - z * se,
        ci_high: point + z * se,
        alpha,
        draws: None,
        epsilon_n: None,
        seed: None,
    })
}

/// Delta-method intervals for both endpoints, as `(upper, lower)`.
pub fn smooth_ci(
    form: &AffineBoundForm,
    est: &ThetaEstimate,
    alpha: f64,
) -> Result<(IntervalEstimate, IntervalEstimate)> {
    Ok((
        smooth_interval(form, est, alpha, Endpoint::Upper, DEFAULT_TIE_TOLERANCE)?,
        smooth_interval(form, est, alpha, Endpoint::Lower, DEFAULT_TIE_TOLERANCE)?,
    ))
}

/// Finite-difference statistics `T^(b)` for both endpoints.
#[derive(Debug, Clone, PartialEq)]
pub struct DirectionalStatistics {
    pub upper: Vec<f64>,
    pub lower: Vec<f64>,
    pub epsilon_n: f64,
    /// Draws that were tried, including those rejected at the denominator
    /// floor.
    pub attempts: usize,
}

/// Simulates `T^(b) = (bound(θ̂ + ε Z) − bound(θ̂)) / ε` with `Z ~ N(0, n·Cov(θ̂))`.
///
/// Draws whose perturbed denominator falls to the floor are skipped; the
/// first `B` admissible draws (in draw-index order) are kept, with at most
/// `10·B` attempts.
pub fn directional_statistics(
    form: &AffineBoundForm,
    est: &ThetaEstimate,
    cfg: &NumericalDeltaConfig,
) -> Result<DirectionalStatistics> {
    let form = standardized_form(form, est)?;
    let cov = estimate_covariance(est)?;
    directional_statistics_with(&form, est.theta().values(), &cov, cfg)
}

fn directional_statistics_with(
    form: &AffineBoundForm,
    x: &[f64],
    cov: &CovarianceEstimate,
    cfg: &NumericalDeltaConfig,
) -> Result<DirectionalStatistics> {
    let eps = cfg.step(cov.n)?;
    let base = form.evaluate_raw(x)?;
    let sampler = GaussianSampler::new(&cov.omega())?;
    let wanted = cfg.draws;
    let cap = 10 * wanted;
    let mut upper = Vec::with_capacity(wanted);
    let mut lower = Vec::with_capacity(wanted);
    let mut next = 0usize;
    while upper.len() < wanted && next < cap {
        let batch = (wanted - upper.len()).min(cap - next);
        let results: Vec<Option<(f64, f64)>> = (next..next + batch)
            .into_par_iter()
            .map(|b| {
                let z = sampler.draw(cfg.seed, b as u64);
                let perturbed: Vec<f64> = x.iter().zip(z.iter()).map(|(t, zi)| t + eps * zi).collect();
                form.evaluate_raw(&perturbed)
                    .ok()
                    .map(|p| ((p.upper - base.upper) / eps, (p.lower - base.lower) / eps))
            })
            .collect();
        next += batch;
        for (tu, tl) in results.into_iter().flatten() {
            if upper.len() == wanted {
                break;
            }
            upper.push(tu);
            lower.push(tl);
        }
    }
    if upper.len() < wanted {
        return Err(Error::NearBoundary {
            attempts: next,
            accepted: upper.len(),
        });
    }
    Ok(DirectionalStatistics {
        upper,
        lower,
        epsilon_n: eps,
        attempts: next,
    })
}

fn quantile_interval(
    endpoint: Endpoint,
    point: f64,
    mut stats: Vec<f64>,
    n: u64,
    alpha: f64,
    eps: f64,
    cfg: &NumericalDeltaConfig,
) -> IntervalEstimate {
    stats.sort_by(f64::total_cmp);
    let root_n = (n as f64).sqrt();
    let q_hi = empirical_quantile(&stats, 1.0 - alpha / 2.0);
    let q_lo = empirical_quantile(&stats, alpha / 2.0);
    IntervalEstimate {
        endpoint,
        method: CiMethod::NumericalDelta,
        point,
        se: None,
        ci_low: point - q_hi / root_n,
        ci_high: point - q_lo / root_n,
        alpha,
        draws: Some(cfg.draws),
        epsilon_n: Some(eps),
        seed: Some(cfg.seed),
    }
}

/// Numerical directional delta-method intervals, as `(upper, lower)`.
pub fn numerical_delta_ci(
    form: &AffineBoundForm,
    est: &ThetaEstimate,
    alpha: f64,
    cfg: &NumericalDeltaConfig,
) -> Result<(IntervalEstimate, IntervalEstimate)> {
    two_sided_z(alpha)?;
    let form = standardized_form(form, est)?;
    let cov = estimate_covariance(est)?;
    let x = est.theta().values();
    let stats = directional_statistics_with(&form, x, &cov, cfg)?;
    let point = form.evaluate_raw(x)?;
    let eps = stats.epsilon_n;
    Ok((
        quantile_interval(Endpoint::Upper, point.upper, stats.upper, cov.n, alpha, eps, cfg),
        quantile_interval(Endpoint::Lower, point.lower, stats.lower, cov.n, alpha, eps, cfg),
    ))
}

/// Default near-tie multiplier `c = 2 z_{1-α/2}`.
pub fn default_tie_multiplier(alpha: f64) -> Result<f64> {
    Ok(2.0 * two_sided_z(alpha)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EndpointDiagnostic {
    pub endpoint: Endpoint,
    /// Gap between the optimal numerator term and the runner-up.
    pub gap: f64,
    /// Largest standard deviation among the endpoint's numerator terms.
    pub term_se: f64,
    pub threshold: f64,
    pub near_tie: bool,
    pub recommended: CiMethod,
}

impl EndpointDiagnostic {
    /// Near-tied when `gap <= c · term_se` (boundary inclusive).
    pub fn classify(endpoint: Endpoint, gap: f64, term_se: f64, c: f64) -> Self {
        let threshold = c * term_se;
        let near_tie = gap <= threshold;
        Self {
            endpoint,
            gap,
            term_se,
            threshold,
            near_tie,
            recommended: if near_tie {
                CiMethod::NumericalDelta
            } else {
                CiMethod::SmoothDelta
            },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NearTieReport {
    pub upper: EndpointDiagnostic,
    pub lower: EndpointDiagnostic,
}

impl NearTieReport {
    pub fn get(&self, endpoint: Endpoint) -> &EndpointDiagnostic {
        match endpoint {
            Endpoint::Upper => &self.upper,
            Endpoint::Lower => &self.lower,
        }
    }
}

/// Chooses between the smooth and numerical delta methods per endpoint by
/// comparing the active-term gap with the sampling noise of the terms.
pub fn near_tie_diagnostic(form: &AffineBoundForm, est: &ThetaEstimate, c: f64) -> Result<NearTieReport> {
    let form = standardized_form(form, est)?;
    let cov = estimate_covariance(est)?;
    Ok(near_tie_with(&form, est.theta().values(), &cov, c))
}

fn near_tie_with(form: &AffineBoundForm, x: &[f64], cov: &CovarianceEstimate, c: f64) -> NearTieReport {
    let report = form.active_sets_raw(x, 0.0);
    let diag = |endpoint| {
        let term_se = form
            .terms(endpoint)
            .iter()
            .map(|t| cov.quadratic_form(&t.coeffs))
            .fold(0.0, f64::max)
            .sqrt();
        EndpointDiagnostic::classify(endpoint, report.gap(endpoint), term_se, c)
    };
    NearTieReport {
        upper: diag(Endpoint::Upper),
        lower: diag(Endpoint::Lower),
    }
}

/// How [`confidence_intervals`] picks the method for each endpoint.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MethodChoice {
    Smooth,
    #[serde(rename = "numdelta")]
    NumericalDelta,
    Auto,
}

impl FromStr for MethodChoice {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "smooth" => Ok(MethodChoice::Smooth),
            "numdelta" => Ok(MethodChoice::NumericalDelta),
            "auto" => Ok(MethodChoice::Auto),
            other => Err(Error::param("method", format!("unknown method `{other}`"))),
        }
    }
}

/// Intervals for both endpoints (`(upper, lower)`) using the requested
/// method; `Auto` consults [`near_tie_diagnostic`] with the default
/// multiplier.
pub fn confidence_intervals(
    form: &AffineBoundForm,
    est: &ThetaEstimate,
    alpha: f64,
    choice: MethodChoice,
    cfg: &NumericalDeltaConfig,
) -> Result<(IntervalEstimate, IntervalEstimate)> {
    match choice {
        MethodChoice::Smooth => smooth_ci(form, est, alpha),
        MethodChoice::NumericalDelta => numerical_delta_ci(form, est, alpha, cfg),
        MethodChoice::Auto => {
            let form = standardized_form(form, est)?;
            let cov = estimate_covariance(est)?;
            let x = est.theta().values();
            let ties = near_tie_with(&form, x, &cov, default_tie_multiplier(alpha)?);
            let numerical = if ties.upper.near_tie || ties.lower.near_tie {
                Some(numerical_delta_ci(&form, est, alpha, cfg)?)
            } else {
                None
            };
            let pick = |endpoint: Endpoint| -> Result<IntervalEstimate> {
                match (&numerical, ties.get(endpoint).near_tie) {
                    (Some((u, l)), true) => Ok(match endpoint {
                        Endpoint::Upper => u.clone(),
                        Endpoint::Lower => l.clone(),
                    }),
                    _ => smooth_interval_with(&form, x, &cov, alpha, endpoint, DEFAULT_TIE_TOLERANCE),
                }
            };
            Ok((pick(Endpoint::Upper)?, pick(Endpoint::Lower)?))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bounds::PocQuantity;
    use crate::inference::{ExperimentalCounts, ObservationalCounts};
    use crate::theta::ThetaLayout;

    fn est(exp: [u64; 4], obs: [u64; 4]) -> ThetaEstimate {
        ThetaEstimate::from_counts(
            ExperimentalCounts {
                m11: exp[0],
                m10: exp[1],
                m01: exp[2],
                m00: exp[3],
            },
            ObservationalCounts {
                n11: obs[0],
                n10: obs[1],
                n01: obs[2],
                n00: obs[3],
            },
        )
        .unwrap()
    }

    fn pns() -> AffineBoundForm {
        PocQuantity::Pns.form(&ThetaLayout::standard()).unwrap()
    }

    #[test]
    fn quantile_interpolation() {
        let s = [1.0, 2.0, 3.0, 4.0, 5.0];
        assert_eq!(empirical_quantile(&s, 0.0), 1.0);
        assert_eq!(empirical_quantile(&s, 1.0), 5.0);
        assert_eq!(empirical_quantile(&s, 0.5), 3.0);
        assert!((empirical_quantile(&s, 0.1) - 1.4).abs() < 1e-15);
    }

    #[test]
    fn smooth_ci_hand_arithmetic() {
        // Upper endpoint is P(y_x) = 0.5 from 100 treated units: se = 0.05.
        let e = est([50, 50, 10, 90], [10, 40, 5, 45]);
        let (up, _) = smooth_ci(&pns(), &e, 0.05).unwrap();
        assert!((up.point - 0.5).abs() < 1e-15);
        assert!((up.se.unwrap() - 0.05).abs() < 1e-15);
        let z = 1.959963984540054;
        assert!((up.ci_low - (0.5 - z * 0.05)).abs() < 1e-12);
        assert!((up.ci_high - (0.5 + z * 0.05)).abs() < 1e-12);
        assert_eq!(up.method, CiMethod::SmoothDelta);
    }

    #[test]
    fn zero_gradient_collapses() {
        // Lower PNS active term is the constant zero.
        let e = est([20, 80, 60, 40], [10, 40, 30, 20]);
        let (_, low) = smooth_ci(&pns(), &e, 0.05).unwrap();
        assert_eq!(low.point, 0.0);
        assert_eq!(low.se, Some(0.0));
        assert_eq!((low.ci_low, low.ci_high), (0.0, 0.0));
    }

    #[test]
    fn tie_rejected_by_smooth() {
        let e = est([50, 50, 50, 50], [25, 25, 25, 25]);
        assert!(matches!(
            smooth_ci(&pns(), &e, 0.05),
            Err(Error::NonSmoothEndpoint { .. })
        ));
    }

    #[test]
    fn zero_covariance_numerical_interval_is_a_point() {
        // Every proportion is 0 or 1 so all variances vanish.
        let e = est([10, 0, 0, 10], [20, 0, 0, 0]);
        let (up, low) = numerical_delta_ci(&pns(), &e, 0.05, &NumericalDeltaConfig::with_seed(1)).unwrap();
        for iv in [up, low] {
            assert_eq!(iv.ci_low, iv.point);
            assert_eq!(iv.ci_high, iv.point);
            assert_eq!(iv.method, CiMethod::NumericalDelta);
            assert_eq!(iv.se, None);
        }
    }

    #[test]
    fn numerical_ci_is_deterministic() {
        let e = est([300, 200, 150, 350], [120, 80, 200, 100]);
        let cfg = NumericalDeltaConfig {
            epsilon_n: None,
            draws: 500,
            seed: 99,
        };
        let a = numerical_delta_ci(&pns(), &e, 0.05, &cfg).unwrap();
        let b = numerical_delta_ci(&pns(), &e, 0.05, &cfg).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.0.epsilon_n, Some(500f64.powf(-0.25)));
    }

    #[test]
    fn bad_config_rejected() {
        let e = est([30, 20, 15, 35], [12, 8, 20, 10]);
        let cfg = NumericalDeltaConfig {
            epsilon_n: Some(0.0),
            draws: 100,
            seed: 0,
        };
        assert!(numerical_delta_ci(&pns(), &e, 0.05, &cfg).is_err());
        let cfg = NumericalDeltaConfig {
            epsilon_n: None,
            draws: 1,
            seed: 0,
        };
        assert!(numerical_delta_ci(&pns(), &e, 0.05, &cfg).is_err());
    }

    #[test]
    fn draws_below_denominator_floor_are_replaced() {
        // PN denominator P(x,y) = 1/1000 with a large step: many perturbed
        // draws push it below the floor.
        let pn = PocQuantity::Pn.form(&ThetaLayout::standard()).unwrap();
        let e = est([300, 200, 150, 350], [1, 400, 300, 299]);
        let cfg = NumericalDeltaConfig {
            epsilon_n: Some(5.0),
            draws: 200,
            seed: 3,
        };
        let stats = directional_statistics(&pn, &e, &cfg).unwrap();
        assert_eq!(stats.upper.len(), 200);
        assert!(stats.attempts > 250, "attempts {}", stats.attempts);
        assert!(stats.attempts <= 2000);
    }

    #[test]
    fn tie_classification_rules() {
        let d = EndpointDiagnostic::classify(Endpoint::Upper, 0.05, 0.001, 2.0 * 1.959964);
        assert_eq!(d.recommended, CiMethod::SmoothDelta);
        let d = EndpointDiagnostic::classify(Endpoint::Upper, 0.0, 0.001, 3.9);
        assert_eq!(d.recommended, CiMethod::NumericalDelta);
        let d = EndpointDiagnostic::classify(Endpoint::Upper, 0.5, 0.25, 2.0);
        assert_eq!(d.recommended, CiMethod::NumericalDelta);
    }

    #[test]
    fn diagnostic_on_exact_tie_and_clear_gap() {
        let tied = est([50, 50, 50, 50], [25, 25, 25, 25]);
        let r = near_tie_diagnostic(&pns(), &tied, default_tie_multiplier(0.05).unwrap()).unwrap();
        assert_eq!(r.lower.recommended, CiMethod::NumericalDelta);
        assert_eq!(r.upper.recommended, CiMethod::NumericalDelta);

        // Large sample at theta with gaps 0.15 on both endpoints.
        let clear = est([5000, 5000, 1000, 9000], [3000, 3000, 500, 3500]);
        let r = near_tie_diagnostic(&pns(), &clear, default_tie_multiplier(0.05).unwrap()).unwrap();
        assert_eq!(r.upper.recommended, CiMethod::SmoothDelta);
        assert_eq!(r.lower.recommended, CiMethod::SmoothDelta);
        assert!(r.upper.gap > r.upper.threshold);
    }

    #[test]
    fn auto_mixes_methods_per_endpoint() {
        // Lower endpoint tied (symmetric experimental arms, P(y) = 0.5);
        // upper endpoint has a clear winner.
        let e = est([5000, 5000, 5000, 5000], [4000, 1000, 1000, 4000]);
        let (up, low) = confidence_intervals(
            &pns(),
            &e,
            0.05,
            MethodChoice::Auto,
            &NumericalDeltaConfig::with_seed(5),
        )
        .unwrap();
        assert_eq!(low.method, CiMethod::NumericalDelta);
        assert_eq!(up.method, CiMethod::SmoothDelta);
    }

    #[test]
    fn record_field_names() {
        let e = est([50, 50, 10, 90], [10, 40, 5, 45]);
        let (up, _) = smooth_ci(&pns(), &e, 0.05).unwrap();
        let v = serde_json::to_value(&up).unwrap();
        let mut keys: Vec<_> = v.as_object().unwrap().keys().cloned().collect();
        keys.sort();
        assert_eq!(
            keys,
            [
                "B",
                "alpha",
                "ci_high",
                "ci_low",
                "endpoint",
                "epsilon_n",
                "method",
                "point",
                "se",
                "seed"
            ]
        );
        assert_eq!(v["method"], "smooth-delta");
        assert_eq!(v["endpoint"], "upper");
    }
}
