use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::exact::ExactSum;
use super::{f_x, f_y, ScmSpec, COVARIATES};
use crate::bounds::{BoundPair, PocQuantity};
use crate::theta::{Theta, ThetaLayout};

const HALF: usize = COVARIATES / 2;
const HALF_SIZE: usize = 1 << HALF;

/// Weight and partial mediator sums for every assignment of one half of the
/// covariates.
pub(crate) struct HalfTable {
    pub weight: Vec<f64>,
    pub mx: Vec<f64>,
    pub my: Vec<f64>,
}

impl HalfTable {
    pub(crate) fn new(spec: &ScmSpec, offset: usize) -> Self {
        let mut weight = Vec::with_capacity(HALF_SIZE);
        let mut mx = Vec::with_capacity(HALF_SIZE);
        let mut my = Vec::with_capacity(HALF_SIZE);
        for bits in 0..HALF_SIZE {
            let (mut w, mut sx, mut sy) = (1.0, 0.0, 0.0);
            for j in 0..HALF {
                let i = offset + j;
                let p = spec.uz_probs[i];
                if bits >> j & 1 == 1 {
                    w *= p;
                    sx += spec.beta_x[i];
                    sy += spec.beta_y[i];
                } else {
                    w *= 1.0 - p;
                }
            }
            weight.push(w);
            mx.push(sx);
            my.push(sy);
        }
        Self { weight, mx, my }
    }
}

/// Both halves; `M = lo + hi` is the single definition of the mediators used
/// by enumeration and sampling alike.
pub(crate) struct MediatorTables {
    pub lo: HalfTable,
    pub hi: HalfTable,
}

impl MediatorTables {
    pub(crate) fn new(spec: &ScmSpec) -> Self {
        Self {
            lo: HalfTable::new(spec, 0),
            hi: HalfTable::new(spec, HALF),
        }
    }

    #[inline]
    pub(crate) fn mediators(&self, z: u32) -> (f64, f64) {
        let lo = z as usize & (HALF_SIZE - 1);
        let hi = z as usize >> HALF;
        (self.lo.mx[lo] + self.hi.mx[hi], self.lo.my[lo] + self.hi.my[hi])
    }
}

/// Exact population quantities of a model.
#[derive(Debug, Clone, PartialEq)]
pub struct PopulationSummary {
    pub theta_true: Theta,
    pub pns_true: f64,
    pub pns_bounds: BoundPair,
    /// `None` when `P(x,y)` is at the denominator floor.
    pub pn_true: Option<f64>,
    pub pn_bounds: Option<BoundPair>,
    /// `None` when `P(x',y')` is at the denominator floor.
    pub ps_true: Option<f64>,
    pub ps_bounds: Option<BoundPair>,
}

/// Flat serializable view of a [`PopulationSummary`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PopulationRecord {
    pub y_x: f64,
    pub y_xp: f64,
    pub x_y: f64,
    pub x_yp: f64,
    pub xp_y: f64,
    pub xp_yp: f64,
    pub pns_true: f64,
    pub pns_lower: f64,
    pub pns_upper: f64,
    pub pn_true: Option<f64>,
    pub pn_lower: Option<f64>,
    pub pn_upper: Option<f64>,
    pub ps_true: Option<f64>,
    pub ps_lower: Option<f64>,
    pub ps_upper: Option<f64>,
}

impl PopulationSummary {
    pub fn record(&self) -> PopulationRecord {
        let v = self.theta_true.values();
        PopulationRecord {
            y_x: v[0],
            y_xp: v[1],
            x_y: v[2],
            x_yp: v[3],
            xp_y: v[4],
            xp_yp: v[5],
            pns_true: self.pns_true,
            pns_lower: self.pns_bounds.lower,
            pns_upper: self.pns_bounds.upper,
            pn_true: self.pn_true,
            pn_lower: self.pn_bounds.map(|b| b.lower),
            pn_upper: self.pn_bounds.map(|b| b.upper),
            ps_true: self.ps_true,
            ps_lower: self.ps_bounds.map(|b| b.lower),
            ps_upper: self.ps_bounds.map(|b| b.upper),
        }
    }
}

// Accumulator slots.
const Y_X: usize = 0;
const Y_XP: usize = 1;
const JOINT: usize = 2; // x_y, x_yp, xp_y, xp_yp
const PNS: usize = 6;
const PN_NUM: usize = 7;
const PS_NUM: usize = 8;
const SLOTS: usize = 9;

#[derive(Clone, Copy)]
struct Options {
    reversed: bool,
    marginalize_ux: bool,
}

/// Exact population summary by summing over all `2^22` exogenous
/// configurations. The result does not depend on the number of worker
/// threads.
pub fn enumerate_population(spec: &ScmSpec) -> PopulationSummary {
    summarize(accumulate(
        spec,
        Options {
            reversed: false,
            marginalize_ux: true,
        },
    ))
}

/// Like [`enumerate_population`] but without summing `U_X` out of the
/// interventional terms first.
pub fn enumerate_population_full(spec: &ScmSpec) -> PopulationSummary {
    summarize(accumulate(
        spec,
        Options {
            reversed: false,
            marginalize_ux: false,
        },
    ))
}

fn accumulate(spec: &ScmSpec, opts: Options) -> [f64; SLOTS] {
    let tables = MediatorTables::new(spec);
    let c = spec.c;
    let pu = |p: f64, u: bool| if u { p } else { 1.0 - p };
    let partition = |hi: usize| -> Vec<ExactSum> {
        let mut acc = vec![ExactSum::new(); SLOTS];
        let w_hi = tables.hi.weight[hi];
        if w_hi == 0.0 {
            return acc;
        }
        for k in 0..HALF_SIZE {
            let lo = if opts.reversed { HALF_SIZE - 1 - k } else { k };
            let w = w_hi * tables.lo.weight[lo];
            if w == 0.0 {
                continue;
            }
            let mx = tables.lo.mx[lo] + tables.hi.mx[hi];
            let my = tables.lo.my[lo] + tables.hi.my[hi];
            for uy in [false, true] {
                let wy = w * pu(spec.uy_prob, uy);
                if wy == 0.0 {
                    continue;
                }
                let y1 = f_y(true, my, uy, c);
                let y0 = f_y(false, my, uy, c);
                let benefit = y1 && !y0;
                if opts.marginalize_ux {
                    if y1 {
                        acc[Y_X].add(wy);
                    }
                    if y0 {
                        acc[Y_XP].add(wy);
                    }
                    if benefit {
                        acc[PNS].add(wy);
                    }
                }
                for ux in [false, true] {
                    let wxy = wy * pu(spec.ux_prob, ux);
                    if wxy == 0.0 {
                        continue;
                    }
                    if !opts.marginalize_ux {
                        if y1 {
                            acc[Y_X].add(wxy);
                        }
                        if y0 {
                            acc[Y_XP].add(wxy);
                        }
                        if benefit {
                            acc[PNS].add(wxy);
                        }
                    }
                    let x = f_x(mx, ux);
                    let y = if x { y1 } else { y0 };
                    let cell = match (x, y) {
                        (true, true) => 0,
                        (true, false) => 1,
                        (false, true) => 2,
                        (false, false) => 3,
                    };
                    acc[JOINT + cell].add(wxy);
                    if benefit {
                        acc[if x { PN_NUM } else { PS_NUM }].add(wxy);
                    }
                }
            }
        }
        acc
    };
    let order: Vec<usize> = if opts.reversed {
        (0..HALF_SIZE).rev().collect()
    } else {
        (0..HALF_SIZE).collect()
    };
    let parts: Vec<Vec<ExactSum>> = order.into_par_iter().map(partition).collect();
    let mut total = vec![ExactSum::new(); SLOTS];
    for part in &parts {
        for (t, p) in total.iter_mut().zip(part) {
            t.merge(p);
        }
    }
    let mut out = [0.0; SLOTS];
    for (o, t) in out.iter_mut().zip(&total) {
        *o = t.value();
    }
    out
}

fn summarize(acc: [f64; SLOTS]) -> PopulationSummary {
    let p = |v: f64| v.clamp(0.0, 1.0);
    let values = vec![
        p(acc[Y_X]),
        p(acc[Y_XP]),
        p(acc[JOINT]),
        p(acc[JOINT + 1]),
        p(acc[JOINT + 2]),
        p(acc[JOINT + 3]),
    ];
    let layout = ThetaLayout::standard();
    let theta_true = Theta::new(layout.clone(), values).expect("enumerated probabilities form a valid theta");
    let bounds = |q: PocQuantity| q.form(&layout).and_then(|f| f.evaluate(&theta_true)).ok();
    let pns_bounds = bounds(PocQuantity::Pns).expect("PNS bounds have no denominator");
    let pn_bounds = bounds(PocQuantity::Pn);
    let ps_bounds = bounds(PocQuantity::Ps);
    PopulationSummary {
        pns_true: p(acc[PNS]),
        pns_bounds,
        pn_true: pn_bounds.map(|_| acc[PN_NUM] / acc[JOINT]),
        pn_bounds,
        ps_true: ps_bounds.map(|_| acc[PS_NUM] / acc[JOINT + 3]),
        ps_bounds,
        theta_true,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn degenerate() -> ScmSpec {
        ScmSpec {
            uz_probs: vec![0.0; COVARIATES],
            ux_prob: 0.0,
            uy_prob: 0.0,
            beta_x: vec![0.3; COVARIATES],
            beta_y: vec![-0.2; COVARIATES],
            c: 0.5,
        }
    }

    #[test]
    fn deterministic_model() {
        let s = enumerate_population(&degenerate());
        let v = s.theta_true.values();
        assert_eq!(v[0], 1.0);
        assert_eq!(v[1], 0.0);
        assert_eq!(s.pns_true, 1.0);
        // M_X = 0, U_X = 0: X = 0 and Y = 0 always.
        assert_eq!(&v[2..], &[0.0, 0.0, 0.0, 1.0]);
        assert_eq!(s.pn_true, None);
        assert_eq!(s.ps_true, Some(1.0));
    }

    #[test]
    fn model1_frozen_values() {
        let s = enumerate_population(&ScmSpec::model1());
        let want = [0.616929, 0.456542, 0.255686, 0.141791, 0.242655, 0.359868];
        for (got, want) in s.theta_true.values().iter().zip(want) {
            assert!((got - want).abs() < 5e-7, "{got} vs {want}");
        }
        assert!((s.pns_true - 0.258443).abs() < 5e-7);
        assert!(s.pns_bounds.lower <= s.pns_true && s.pns_true <= s.pns_bounds.upper);
    }

    #[test]
    fn model2_frozen_values() {
        let s = enumerate_population(&ScmSpec::model2());
        let want = [0.755715, 0.389174, 0.187267, 0.074841, 0.330981, 0.406911];
        for (got, want) in s.theta_true.values().iter().zip(want) {
            assert!((got - want).abs() < 5e-7, "{got} vs {want}");
        }
        assert!((s.pns_true - 0.427388).abs() < 5e-7);
        assert!((s.pns_bounds.lower - 0.36654).abs() < 5e-6);
        assert!((s.pns_bounds.upper - 0.59418).abs() < 5e-6);
    }

    #[test]
    fn reversed_order_is_bit_identical() {
        let spec = ScmSpec::model1();
        let fwd = accumulate(
            &spec,
            Options {
                reversed: false,
                marginalize_ux: true,
            },
        );
        let rev = accumulate(
            &spec,
            Options {
                reversed: true,
                marginalize_ux: true,
            },
        );
        for (a, b) in fwd.iter().zip(&rev) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn marginalizing_ux_matches_full_sum() {
        let spec = ScmSpec::model2();
        let a = enumerate_population(&spec);
        let b = enumerate_population_full(&spec);
        for (x, y) in a.theta_true.values().iter().zip(b.theta_true.values()) {
            assert!((x - y).abs() < 1e-15);
        }
        assert!((a.pns_true - b.pns_true).abs() < 1e-15);
        assert_eq!(&a.theta_true.values()[2..], &b.theta_true.values()[2..]);
    }

    #[test]
    fn tables_match_direct_sums() {
        let spec = ScmSpec::model1();
        let t = MediatorTables::new(&spec);
        for z in [0u32, 1, 0xfffff, 0x12345, 1 << 19] {
            let (mx, my) = t.mediators(z);
            let (dx, dy) = spec.mediators(z);
            assert!((mx - dx).abs() < 1e-12 && (my - dy).abs() < 1e-12);
        }
    }
}
