//! Brute-force sharp bounds from the response-type decomposition.
//!
//! Every unit has one of four response types (`always`, `benefit`, `harm`,
//! `never`: the values of `(Y_x, Y_{x'})`) and an observed treatment. A
//! distribution `q` over the eight (type, treatment) cells reproduces θ when
//!
//! ```text
//! P(y_x)   = Σ_t̃ q[always,t̃] + q[benefit,t̃]
//! P(y_x')  = Σ_t̃ q[always,t̃] + q[harm,t̃]
//! P(x,y)   = q[always,x]  + q[benefit,x]
//! P(x',y)  = q[always,x'] + q[harm,x']
//! P(x)     = Σ_t q[t,x],    P(x') = Σ_t q[t,x']
//! ```
//!
//! PNS is `q[benefit,x] + q[benefit,x']`. The feasible set is a polytope
//! with at most `C(8,6)` vertices, enumerated directly here.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::Exp1;

use crate::bounds::{BoundPair, DENOMINATOR_FLOOR};
use crate::error::{Error, Result};
use crate::theta::{symbols, Theta};

pub const ALWAYS: usize = 0;
pub const BENEFIT: usize = 1;
pub const HARM: usize = 2;
pub const NEVER: usize = 3;

/// Weights `q[type][treatment]`, treatment 0 = `x`, 1 = `x'`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResponseTypeDistribution {
    pub weights: [[f64; 2]; 4],
}

impl ResponseTypeDistribution {
    fn from_flat(q: &[f64]) -> Self {
        let mut weights = [[0.0; 2]; 4];
        for (k, &v) in q.iter().enumerate() {
            weights[k / 2][k % 2] = v;
        }
        Self { weights }
    }

    /// The induced `[y_x, y_xp, x_y, x_yp, xp_y, xp_yp]`.
    pub fn theta_values(&self) -> [f64; 6] {
        let q = &self.weights;
        let both = |t: usize| q[t][0] + q[t][1];
        [
            both(ALWAYS) + both(BENEFIT),
            both(ALWAYS) + both(HARM),
            q[ALWAYS][0] + q[BENEFIT][0],
            q[HARM][0] + q[NEVER][0],
            q[ALWAYS][1] + q[HARM][1],
            q[BENEFIT][1] + q[NEVER][1],
        ]
    }

    pub fn pns(&self) -> f64 {
        self.weights[BENEFIT][0] + self.weights[BENEFIT][1]
    }
}

fn standard_values(theta: &Theta) -> Result<[f64; 6]> {
    let mut out = [0.0; 6];
    for (o, s) in out.iter_mut().zip(symbols::STANDARD) {
        *o = theta
            .get(s)
            .ok_or_else(|| Error::Layout(format!("oracle needs symbol `{s}`")))?;
    }
    Ok(out)
}

/// Constraint matrix over the flattened `q` (index `2·type + treatment`).
fn constraints(v: &[f64; 6]) -> (DMatrix<f64>, DVector<f64>) {
    let idx = |t: usize, x: usize| 2 * t + x;
    let mut a = DMatrix::zeros(6, 8);
    for x in 0..2 {
        a[(0, idx(ALWAYS, x))] = 1.0;
        a[(0, idx(BENEFIT, x))] = 1.0;
        a[(1, idx(ALWAYS, x))] = 1.0;
        a[(1, idx(HARM, x))] = 1.0;
    }
    a[(2, idx(ALWAYS, 0))] = 1.0;
    a[(2, idx(BENEFIT, 0))] = 1.0;
    a[(3, idx(ALWAYS, 1))] = 1.0;
    a[(3, idx(HARM, 1))] = 1.0;
    for t in 0..4 {
        a[(4, idx(t, 0))] = 1.0;
        a[(5, idx(t, 1))] = 1.0;
    }
    let b = DVector::from_vec(vec![v[0], v[1], v[2], v[4], v[2] + v[3], v[4] + v[5]]);
    (a, b)
}

fn check_consistent(theta: &Theta, tol: f64) -> Result<()> {
    let violation = theta.consistency_violation()?;
    if violation > tol {
        return Err(Error::Infeasible(format!(
            "consistency constraints violated by {violation:e}"
        )));
    }
    Ok(())
}

/// All basic feasible solutions of the response-type polytope.
pub fn vertices(theta: &Theta, tol: f64) -> Result<Vec<ResponseTypeDistribution>> {
    check_consistent(theta, tol)?;
    let v = standard_values(theta)?;
    let (a, b) = constraints(&v);
    let slack = tol.max(1e-12);
    let mut out = Vec::new();
    for skip1 in 0..8 {
        for skip2 in skip1 + 1..8 {
            let basis: Vec<usize> = (0..8).filter(|&k| k != skip1 && k != skip2).collect();
            let sub = a.select_columns(&basis);
            let Some(sol) = sub.clone().lu().solve(&b) else {
                continue;
            };
            if sol.iter().any(|x| !x.is_finite() || *x < -slack) || (&sub * &sol - &b).amax() > slack {
                continue;
            }
            let mut q = [0.0; 8];
            for (&k, &x) in basis.iter().zip(sol.iter()) {
                q[k] = x.max(0.0);
            }
            out.push(ResponseTypeDistribution::from_flat(&q));
        }
    }
    if out.is_empty() {
        return Err(Error::Infeasible(
            "no response-type distribution reproduces theta".into(),
        ));
    }
    Ok(out)
}

fn optimize(theta: &Theta, tol: f64, objective: impl Fn(&ResponseTypeDistribution) -> f64) -> Result<BoundPair> {
    let vs = vertices(theta, tol)?;
    let values = vs.iter().map(objective);
    let (lower, upper) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), x| (lo.min(x), hi.max(x)));
    Ok(BoundPair { lower, upper })
}

/// Sharp PNS bounds by vertex enumeration.
pub fn pns_sharp_oracle(theta: &Theta, tol: f64) -> Result<BoundPair> {
    optimize(theta, tol, ResponseTypeDistribution::pns)
}

fn ratio_oracle(theta: &Theta, tol: f64, denom: &str, cell: usize) -> Result<BoundPair> {
    let h = theta
        .get(denom)
        .ok_or_else(|| Error::Layout(format!("oracle needs symbol `{denom}`")))?;
    if h <= DENOMINATOR_FLOOR {
        return Err(Error::DegenerateDenominator {
            symbol: denom.to_owned(),
            value: h,
            floor: DENOMINATOR_FLOOR,
        });
    }
    let b = optimize(theta, tol, |q| q.weights[BENEFIT][cell])?;
    Ok(BoundPair {
        lower: b.lower / h,
        upper: b.upper / h,
    })
}

/// Sharp PN bounds: the benefit mass among treated units with `Y = y`,
/// divided by `P(x,y)`.
pub fn pn_sharp_oracle(theta: &Theta, tol: f64) -> Result<BoundPair> {
    ratio_oracle(theta, tol, symbols::X_Y, 0)
}

/// Sharp PS bounds: the benefit mass among untreated units with `Y = y'`,
/// divided by `P(x',y')`.
pub fn ps_sharp_oracle(theta: &Theta, tol: f64) -> Result<BoundPair> {
    ratio_oracle(theta, tol, symbols::XP_YP, 1)
}

/// Cross-check of [`pns_sharp_oracle`] by iterated grid search over the two
/// benefit cells, every other cell being determined by θ.
pub fn pns_grid_oracle(theta: &Theta, tol: f64) -> Result<BoundPair> {
    check_consistent(theta, tol)?;
    let v = standard_values(theta)?;
    let [y_x, y_xp, x_y, x_yp, xp_y, xp_yp] = v;
    let feasible = |s: f64, t: f64| {
        let q = [
            x_y - s,
            s,
            y_xp - x_y - xp_y + s,
            x_yp - (y_xp - x_y - xp_y + s),
            y_x - x_y - t,
            t,
            xp_y - (y_x - x_y - t),
            xp_yp - t,
        ];
        q.iter().all(|&w| w >= -1e-12)
    };
    const STEPS: usize = 64;
    let search = |sign: f64| -> Option<f64> {
        let (mut s0, mut s1, mut t0, mut t1) = (0.0, x_y, 0.0, xp_yp);
        let mut best: Option<(f64, f64, f64)> = None;
        for _ in 0..40 {
            let mut round: Option<(f64, f64, f64)> = None;
            for i in 0..=STEPS {
                let s = s0 + (s1 - s0) * i as f64 / STEPS as f64;
                for j in 0..=STEPS {
                    let t = t0 + (t1 - t0) * j as f64 / STEPS as f64;
                    if feasible(s, t) && round.map_or(true, |(_, _, o)| sign * (s + t) > o) {
                        round = Some((s, t, sign * (s + t)));
                    }
                }
            }
            let (s, t, o) = round.or(best)?;
            if best.map_or(true, |(_, _, b)| o >= b) {
                best = Some((s, t, o));
            }
            let ds = (s1 - s0) / STEPS as f64 * 2.0;
            let dt = (t1 - t0) / STEPS as f64 * 2.0;
            (s0, s1) = ((s - ds).max(0.0), (s + ds).min(x_y));
            (t0, t1) = ((t - dt).max(0.0), (t + dt).min(xp_yp));
        }
        best.map(|(_, _, o)| sign * o)
    };
    match (search(-1.0), search(1.0)) {
        (Some(lower), Some(upper)) => Ok(BoundPair { lower, upper }),
        _ => Err(Error::Infeasible("grid search found no feasible point".into())),
    }
}

/// A θ induced by a uniformly random response-type distribution, hence
/// consistent with some structural model.
pub fn random_consistent_theta<R: Rng + ?Sized>(rng: &mut R) -> Theta {
    let raw: Vec<f64> = (0..8).map(|_| rng.sample::<f64, _>(Exp1)).collect();
    let total: f64 = raw.iter().sum();
    let q: Vec<f64> = raw.iter().map(|w| w / total).collect();
    let mut v = ResponseTypeDistribution::from_flat(&q).theta_values();
    // Absorb rounding so the observational joint sums to one.
    let joint: f64 = v[2..].iter().sum();
    v[5] = (v[5] + 1.0 - joint).max(0.0);
    Theta::standard(v).expect("induced theta is valid")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bounds::PocQuantity;
    use crate::rng::stream_rng;
    use crate::theta::ThetaLayout;

    fn close(a: BoundPair, lo: f64, hi: f64) {
        assert!(
            (a.lower - lo).abs() < 1e-9 && (a.upper - hi).abs() < 1e-9,
            "{a:?} vs ({lo}, {hi})"
        );
    }

    #[test]
    fn reference_points() {
        let t = Theta::standard([0.55, 0.35, 0.30, 0.20, 0.10, 0.40]).unwrap();
        close(pns_sharp_oracle(&t, 1e-9).unwrap(), 0.20, 0.50);
        close(pns_grid_oracle(&t, 1e-9).unwrap(), 0.20, 0.50);
        close(pn_sharp_oracle(&t, 1e-9).unwrap(), 1.0 / 6.0, 5.0 / 6.0);
        close(ps_sharp_oracle(&t, 1e-9).unwrap(), 0.375, 0.625);

        let t = Theta::standard([1.0, 0.0, 0.5, 0.0, 0.0, 0.5]).unwrap();
        close(pns_sharp_oracle(&t, 1e-9).unwrap(), 1.0, 1.0);

        let t = Theta::standard([0.5, 0.5, 0.25, 0.25, 0.25, 0.25]).unwrap();
        close(pns_sharp_oracle(&t, 1e-9).unwrap(), 0.0, 0.5);
        close(pns_grid_oracle(&t, 1e-9).unwrap(), 0.0, 0.5);
    }

    #[test]
    fn inconsistent_theta_is_infeasible() {
        // P(x,y) = 0.5 > P(y_x) = 0.3.
        let t = Theta::standard([0.3, 0.3, 0.5, 0.1, 0.2, 0.2]).unwrap();
        assert!(matches!(pns_sharp_oracle(&t, 1e-9), Err(Error::Infeasible(_))));
        assert!(matches!(pns_grid_oracle(&t, 1e-9), Err(Error::Infeasible(_))));
    }

    #[test]
    fn vertices_reproduce_theta() {
        let t = Theta::standard([0.55, 0.35, 0.30, 0.20, 0.10, 0.40]).unwrap();
        for q in vertices(&t, 1e-9).unwrap() {
            for (a, b) in q.theta_values().iter().zip(t.values()) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn random_theta_matches_closed_form() {
        let form = PocQuantity::Pns.form(&ThetaLayout::standard()).unwrap();
        let mut rng = stream_rng(17, 0);
        for _ in 0..500 {
            let t = random_consistent_theta(&mut rng);
            assert!(t.consistency_violation().unwrap() <= 1e-12);
            let o = pns_sharp_oracle(&t, 1e-9).unwrap();
            let g = pns_grid_oracle(&t, 1e-9).unwrap();
            let f = form.evaluate(&t).unwrap();
            assert!((o.lower - f.lower).abs() < 1e-9 && (o.upper - f.upper).abs() < 1e-9);
            assert!((o.lower - g.lower).abs() < 1e-6 && (o.upper - g.upper).abs() < 1e-6);
        }
    }
}
