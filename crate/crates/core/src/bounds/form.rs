use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{Endpoint, DEFAULT_TIE_TOLERANCE, DENOMINATOR_FLOOR};
use crate::error::{Error, Result};
use crate::theta::{symbols, Theta, ThetaLayout};

/// One affine numerator term `coeffs·θ + offset`.
#[derive(Debug, Clone, PartialEq)]
pub struct AffineTerm {
    pub coeffs: Vec<f64>,
    pub offset: f64,
}

impl AffineTerm {
    pub fn value(&self, theta: &[f64]) -> f64 {
        self.coeffs
            .iter()
            .zip(theta)
            .fold(self.offset, |acc, (c, t)| acc + c * t)
    }

    fn from_parts(layout: &ThetaLayout, parts: &[(&str, f64)], offset: f64) -> Result<Self> {
        let mut coeffs = vec![0.0; layout.dim()];
        for &(symbol, c) in parts {
            coeffs[layout.require(symbol)?] += c;
        }
        Ok(Self { coeffs, offset })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Denominator {
    One,
    /// Index of the layout component used as denominator.
    Component(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundPair {
    pub lower: f64,
    pub upper: f64,
}

impl BoundPair {
    pub fn get(&self, endpoint: Endpoint) -> f64 {
        match endpoint {
            Endpoint::Upper => self.upper,
            Endpoint::Lower => self.lower,
        }
    }
}

/// Which terms attain the optimum of each endpoint, and by how much the
/// runner-up misses it.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ActiveSetReport {
    pub upper_active: Vec<usize>,
    pub lower_active: Vec<usize>,
    /// Zero when several terms are tied; `+inf` when the endpoint has a
    /// single term.
    pub upper_gap: f64,
    pub lower_gap: f64,
    pub tolerance: f64,
}

impl ActiveSetReport {
    pub fn active(&self, endpoint: Endpoint) -> &[usize] {
        match endpoint {
            Endpoint::Upper => &self.upper_active,
            Endpoint::Lower => &self.lower_active,
        }
    }

    pub fn gap(&self, endpoint: Endpoint) -> f64 {
        match endpoint {
            Endpoint::Upper => self.upper_gap,
            Endpoint::Lower => self.lower_gap,
        }
    }
}

/// Gradients of every active term of one endpoint.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GeneralizedGradient {
    pub endpoint: Endpoint,
    pub terms: Vec<usize>,
    pub gradients: Vec<Vec<f64>>,
}

impl GeneralizedGradient {
    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, &[f64])> {
        self.terms.iter().copied().zip(self.gradients.iter().map(Vec::as_slice))
    }
}

/// The three built-in probabilities of causation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PocQuantity {
    Pns,
    Pn,
    Ps,
}

impl PocQuantity {
    pub fn form(self, layout: &Arc<ThetaLayout>) -> Result<AffineBoundForm> {
        match self {
            PocQuantity::Pns => AffineBoundForm::pns(layout),
            PocQuantity::Pn => AffineBoundForm::pn(layout),
            PocQuantity::Ps => AffineBoundForm::ps(layout),
        }
    }
}

impl fmt::Display for PocQuantity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PocQuantity::Pns => "pns",
            PocQuantity::Pn => "pn",
            PocQuantity::Ps => "ps",
        })
    }
}

impl FromStr for PocQuantity {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "pns" => Ok(PocQuantity::Pns),
            "pn" => Ok(PocQuantity::Pn),
            "ps" => Ok(PocQuantity::Ps),
            other => Err(Error::param("quantity", format!("unknown quantity `{other}`"))),
        }
    }
}

/// Bounds of the form `min_j(a_j·θ+b_j)/h(θ)` and `max_k(c_k·θ+d_k)/h(θ)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "super::FormDocument", into = "super::FormDocument")]
pub struct AffineBoundForm {
    layout: Arc<ThetaLayout>,
    upper_terms: Vec<AffineTerm>,
    lower_terms: Vec<AffineTerm>,
    denominator: Denominator,
}

impl AffineBoundForm {
    pub fn new(
        layout: Arc<ThetaLayout>,
        upper_terms: Vec<AffineTerm>,
        lower_terms: Vec<AffineTerm>,
        denominator: Denominator,
    ) -> Result<Self> {
        if upper_terms.is_empty() || lower_terms.is_empty() {
            return Err(Error::Layout(
                "a bound form needs at least one upper and one lower term".into(),
            ));
        }
        let d = layout.dim();
        for (name, terms) in [("upper", &upper_terms), ("lower", &lower_terms)] {
            for (i, t) in terms.iter().enumerate() {
                if t.coeffs.len() != d {
                    return Err(Error::Layout(format!(
                        "{name} term {i} has {} coefficients, layout has {d}",
                        t.coeffs.len()
                    )));
                }
                if !t.offset.is_finite() || t.coeffs.iter().any(|c| !c.is_finite()) {
                    return Err(Error::Layout(format!("{name} term {i} is not finite")));
                }
            }
        }
        if let Denominator::Component(k) = denominator {
            if k >= d {
                return Err(Error::Layout(format!(
                    "denominator index {k} out of range for dimension {d}"
                )));
            }
        }
        Ok(Self {
            layout,
            upper_terms,
            lower_terms,
            denominator,
        })
    }

    /// PNS bounds with denominator one.
    ///
    /// The second upper term is `P(y'_{x'}) = 1 - P(y_{x'})`; using `P(y_{x'})`
    /// there would give upper < lower on consistent inputs.
    pub fn pns(layout: &Arc<ThetaLayout>) -> Result<Self> {
        use symbols::*;
        let t = |parts: &[(&str, f64)], offset| AffineTerm::from_parts(layout, parts, offset);
        let lower = vec![
            t(&[], 0.0)?,
            t(&[(Y_X, 1.0), (Y_XP, -1.0)], 0.0)?,
            t(&[(X_Y, 1.0), (XP_Y, 1.0), (Y_XP, -1.0)], 0.0)?,
            t(&[(Y_X, 1.0), (X_Y, -1.0), (XP_Y, -1.0)], 0.0)?,
        ];
        let upper = vec![
            t(&[(Y_X, 1.0)], 0.0)?,
            t(&[(Y_XP, -1.0)], 1.0)?,
            t(&[(X_Y, 1.0), (XP_YP, 1.0)], 0.0)?,
            t(&[(Y_X, 1.0), (Y_XP, -1.0), (X_YP, 1.0), (XP_Y, 1.0)], 0.0)?,
        ];
        require_joint(layout)?;
        Self::new(layout.clone(), upper, lower, Denominator::One)
    }

    /// PN bounds over the denominator `P(x,y)`. The clamps `max{0,·}` and
    /// `min{1,·}` become the numerator terms `0` and `P(x,y)`.
    pub fn pn(layout: &Arc<ThetaLayout>) -> Result<Self> {
        use symbols::*;
        let t = |parts: &[(&str, f64)], offset| AffineTerm::from_parts(layout, parts, offset);
        let lower = vec![t(&[], 0.0)?, t(&[(X_Y, 1.0), (XP_Y, 1.0), (Y_XP, -1.0)], 0.0)?];
        let upper = vec![t(&[(X_Y, 1.0)], 0.0)?, t(&[(Y_XP, -1.0), (XP_YP, -1.0)], 1.0)?];
        require_joint(layout)?;
        Self::new(
            layout.clone(),
            upper,
            lower,
            Denominator::Component(layout.require(X_Y)?),
        )
    }

    /// PS bounds over the denominator `P(x',y')`.
    pub fn ps(layout: &Arc<ThetaLayout>) -> Result<Self> {
        use symbols::*;
        let t = |parts: &[(&str, f64)], offset| AffineTerm::from_parts(layout, parts, offset);
        let lower = vec![t(&[], 0.0)?, t(&[(Y_X, 1.0), (X_Y, -1.0), (XP_Y, -1.0)], 0.0)?];
        let upper = vec![t(&[(XP_YP, 1.0)], 0.0)?, t(&[(Y_X, 1.0), (X_Y, -1.0)], 0.0)?];
        require_joint(layout)?;
        Self::new(
            layout.clone(),
            upper,
            lower,
            Denominator::Component(layout.require(XP_YP)?),
        )
    }

    pub fn layout(&self) -> &Arc<ThetaLayout> {
        &self.layout
    }

    pub fn terms(&self, endpoint: Endpoint) -> &[AffineTerm] {
        match endpoint {
            Endpoint::Upper => &self.upper_terms,
            Endpoint::Lower => &self.lower_terms,
        }
    }

    pub fn denominator(&self) -> Denominator {
        self.denominator
    }

    /// Re-expresses the form over `target`, matching symbols by name.
    pub fn remap(&self, target: &Arc<ThetaLayout>) -> Result<Self> {
        if **target == *self.layout {
            return Ok(self.clone());
        }
        let positions = self
            .layout
            .symbols()
            .iter()
            .map(|s| target.require(s))
            .collect::<Result<Vec<_>>>()?;
        let move_term = |t: &AffineTerm| {
            let mut coeffs = vec![0.0; target.dim()];
            for (c, &p) in t.coeffs.iter().zip(&positions) {
                coeffs[p] = *c;
            }
            AffineTerm {
                coeffs,
                offset: t.offset,
            }
        };
        Self::new(
            target.clone(),
            self.upper_terms.iter().map(move_term).collect(),
            self.lower_terms.iter().map(move_term).collect(),
            match self.denominator {
                Denominator::One => Denominator::One,
                Denominator::Component(k) => Denominator::Component(positions[k]),
            },
        )
    }

    fn check_theta(&self, theta: &Theta) -> Result<()> {
        if **theta.layout() != *self.layout {
            return Err(Error::Layout(format!(
                "theta layout {} does not match form layout {}",
                theta.layout(),
                self.layout
            )));
        }
        Ok(())
    }

    /// Denominator value at `x`, erroring when a component denominator is not
    /// above [`DENOMINATOR_FLOOR`].
    pub fn denominator_value(&self, x: &[f64]) -> Result<f64> {
        match self.denominator {
            Denominator::One => Ok(1.0),
            Denominator::Component(k) => {
                let h = x[k];
                if h > DENOMINATOR_FLOOR {
                    Ok(h)
                } else {
                    Err(Error::DegenerateDenominator {
                        symbol: self.layout.symbol(k).to_owned(),
                        value: h,
                        floor: DENOMINATOR_FLOOR,
                    })
                }
            }
        }
    }

    /// Gradient of the denominator (a unit vector or zero).
    pub fn denominator_gradient(&self) -> Vec<f64> {
        let mut g = vec![0.0; self.layout.dim()];
        if let Denominator::Component(k) = self.denominator {
            g[k] = 1.0;
        }
        g
    }

    pub fn numerator_values(&self, x: &[f64], endpoint: Endpoint) -> Vec<f64> {
        self.terms(endpoint).iter().map(|t| t.value(x)).collect()
    }

    /// Optimal numerator (min for the upper endpoint, max for the lower).
    fn optimal_numerator(&self, x: &[f64], endpoint: Endpoint) -> f64 {
        let values = self.terms(endpoint).iter().map(|t| t.value(x));
        match endpoint {
            Endpoint::Upper => values.fold(f64::INFINITY, f64::min),
            Endpoint::Lower => values.fold(f64::NEG_INFINITY, f64::max),
        }
    }

    /// Evaluates one endpoint at a raw vector. No range checks are applied
    /// to `x` besides the denominator floor, so perturbed points outside the
    /// probability simplex are allowed.
    pub fn evaluate_endpoint_raw(&self, x: &[f64], endpoint: Endpoint) -> Result<f64> {
        let h = self.denominator_value(x)?;
        Ok(self.optimal_numerator(x, endpoint) / h)
    }

    pub fn evaluate_raw(&self, x: &[f64]) -> Result<BoundPair> {
        let h = self.denominator_value(x)?;
        Ok(BoundPair {
            lower: self.optimal_numerator(x, Endpoint::Lower) / h,
            upper: self.optimal_numerator(x, Endpoint::Upper) / h,
        })
    }

    pub fn evaluate(&self, theta: &Theta) -> Result<BoundPair> {
        self.check_theta(theta)?;
        self.evaluate_raw(theta.values())
    }

    pub fn active_sets(&self, theta: &Theta, tolerance: f64) -> Result<ActiveSetReport> {
        self.check_theta(theta)?;
        Ok(self.active_sets_raw(theta.values(), tolerance))
    }

    pub fn active_sets_raw(&self, x: &[f64], tolerance: f64) -> ActiveSetReport {
        let tolerance = tolerance.max(0.0);
        let (upper_active, upper_gap) =
            active_and_gap(&self.numerator_values(x, Endpoint::Upper), tolerance, Endpoint::Upper);
        let (lower_active, lower_gap) =
            active_and_gap(&self.numerator_values(x, Endpoint::Lower), tolerance, Endpoint::Lower);
        ActiveSetReport {
            upper_active,
            lower_active,
            upper_gap,
            lower_gap,
            tolerance,
        }
    }

    /// Quotient-rule gradient of one endpoint; errors when the endpoint is
    /// tied at `tolerance`.
    pub fn endpoint_gradient_raw(&self, x: &[f64], endpoint: Endpoint, tolerance: f64) -> Result<Vec<f64>> {
        let h = self.denominator_value(x)?;
        let values = self.numerator_values(x, endpoint);
        let (active, _) = active_and_gap(&values, tolerance.max(0.0), endpoint);
        if active.len() != 1 {
            return Err(Error::NonSmoothEndpoint {
                endpoint,
                active: active.len(),
            });
        }
        let j = active[0];
        Ok(self.term_gradient(j, values[j], h, endpoint))
    }

    /// Gradients of both endpoints at the default tie tolerance, as
    /// `(upper, lower)`.
    pub fn endpoint_gradient(&self, theta: &Theta) -> Result<(Vec<f64>, Vec<f64>)> {
        self.check_theta(theta)?;
        let x = theta.values();
        Ok((
            self.endpoint_gradient_raw(x, Endpoint::Upper, DEFAULT_TIE_TOLERANCE)?,
            self.endpoint_gradient_raw(x, Endpoint::Lower, DEFAULT_TIE_TOLERANCE)?,
        ))
    }

    /// `a_j/h - opt/h² ∇h` for term `j`, where `opt` is the optimal numerator.
    fn term_gradient(&self, j: usize, opt: f64, h: f64, endpoint: Endpoint) -> Vec<f64> {
        let a = &self.terms(endpoint)[j].coeffs;
        let mut g: Vec<f64> = a.iter().map(|c| c / h).collect();
        if let Denominator::Component(k) = self.denominator {
            g[k] -= opt / (h * h);
        }
        g
    }

    pub fn generalized_gradients_raw(
        &self,
        x: &[f64],
        endpoint: Endpoint,
        tolerance: f64,
    ) -> Result<GeneralizedGradient> {
        let h = self.denominator_value(x)?;
        let values = self.numerator_values(x, endpoint);
        let opt = self.optimal_numerator(x, endpoint);
        let (terms, _) = active_and_gap(&values, tolerance.max(0.0), endpoint);
        let gradients = terms.iter().map(|&j| self.term_gradient(j, opt, h, endpoint)).collect();
        Ok(GeneralizedGradient {
            endpoint,
            terms,
            gradients,
        })
    }

    /// Generalized gradients of both endpoints, as `(upper, lower)`.
    pub fn generalized_gradients(
        &self,
        theta: &Theta,
        tolerance: f64,
    ) -> Result<(GeneralizedGradient, GeneralizedGradient)> {
        self.check_theta(theta)?;
        let x = theta.values();
        Ok((
            self.generalized_gradients_raw(x, Endpoint::Upper, tolerance)?,
            self.generalized_gradients_raw(x, Endpoint::Lower, tolerance)?,
        ))
    }
}

fn require_joint(layout: &ThetaLayout) -> Result<()> {
    for s in [symbols::Y_X, symbols::Y_XP].iter().chain(&symbols::JOINT) {
        layout.require(s)?;
    }
    Ok(())
}

/// Indices within `tolerance` of the optimum, and the gap to the best
/// excluded value.
fn active_and_gap(values: &[f64], tolerance: f64, endpoint: Endpoint) -> (Vec<usize>, f64) {
    // Distance from the optimum, oriented so that smaller is better.
    let badness = |v: f64| match endpoint {
        Endpoint::Upper => v,
        Endpoint::Lower => -v,
    };
    let best = values.iter().map(|&v| badness(v)).fold(f64::INFINITY, f64::min);
    let mut active = Vec::new();
    let mut runner_up = f64::INFINITY;
    for (i, &v) in values.iter().enumerate() {
        let d = badness(v) - best;
        if d <= tolerance {
            active.push(i);
        } else {
            runner_up = runner_up.min(d);
        }
    }
    let gap = if active.len() > 1 { 0.0 } else { runner_up };
    (active, gap)
}
