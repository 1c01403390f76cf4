use std::sync::Arc;

use pocsize_core::bounds::{AffineTerm, Denominator};
use pocsize_core::oracle::{pns_sharp_oracle, random_consistent_theta};
use pocsize_core::rng::stream_rng;
use pocsize_core::{AffineBoundForm, Endpoint, PocQuantity, Theta, ThetaLayout};
use proptest::prelude::*;

/// Consistent θ built directly: a joint on the simplex, then each
/// experimental value uniform on its admissible interval.
fn consistent_theta() -> impl Strategy<Value = Theta> {
    (prop::array::uniform4(0.01f64..1.0), 0.0f64..=1.0, 0.0f64..=1.0).prop_map(|(w, u, v)| {
        let s: f64 = w.iter().sum();
        let [xy, xyp, xpy, _] = w.map(|a| a / s);
        let xpyp = 1.0 - xy - xyp - xpy;
        let y_x = xy + u * (1.0 - xyp - xy);
        let y_xp = xpy + v * (1.0 - xpyp - xpy);
        Theta::standard([y_x, y_xp, xy, xyp, xpy, xpyp]).unwrap()
    })
}

fn forms() -> Vec<AffineBoundForm> {
    let layout = ThetaLayout::standard();
    [PocQuantity::Pns, PocQuantity::Pn, PocQuantity::Ps]
        .into_iter()
        .map(|q| q.form(&layout).unwrap())
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(10_000))]

    #[test]
    fn lower_never_exceeds_upper(theta in consistent_theta()) {
        prop_assert!(theta.consistency_violation().unwrap() <= 1e-12);
        for form in forms() {
            if let Ok(b) = form.evaluate(&theta) {
                prop_assert!(b.lower <= b.upper + 1e-12, "{b:?}");
            }
        }
    }

    #[test]
    fn closed_form_matches_oracle(theta in consistent_theta()) {
        let form = PocQuantity::Pns.form(&ThetaLayout::standard()).unwrap();
        let f = form.evaluate(&theta).unwrap();
        let o = pns_sharp_oracle(&theta, 1e-9).unwrap();
        prop_assert!((f.lower - o.lower).abs() <= 1e-6 && (f.upper - o.upper).abs() <= 1e-6,
            "closed {f:?} oracle {o:?}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn gradients_match_central_differences(theta in consistent_theta()) {
        let h = 1e-6;
        for form in forms() {
            let x = theta.values();
            let Ok(_) = form.evaluate_raw(x) else { continue };
            let report = form.active_sets_raw(x, 0.0);
            for e in Endpoint::BOTH {
                if report.gap(e) <= 1e-3 {
                    continue;
                }
                let g = form.endpoint_gradient_raw(x, e, 0.0).unwrap();
                for i in 0..x.len() {
                    let mut up = x.to_vec();
                    let mut dn = x.to_vec();
                    up[i] += h;
                    dn[i] -= h;
                    let fd = (form.evaluate_endpoint_raw(&up, e).unwrap()
                        - form.evaluate_endpoint_raw(&dn, e).unwrap())
                        / (2.0 * h);
                    prop_assert!((fd - g[i]).abs() <= 1e-4, "{e:?} coord {i}: fd {fd} vs {}", g[i]);
                }
            }
        }
    }

    #[test]
    fn generalized_gradient_is_singleton_off_ties(theta in consistent_theta()) {
        for form in forms() {
            let x = theta.values();
            let Ok(_) = form.evaluate_raw(x) else { continue };
            let report = form.active_sets_raw(x, 0.0);
            for e in Endpoint::BOTH {
                if report.gap(e) <= 1e-9 {
                    continue;
                }
                let gg = form.generalized_gradients_raw(x, e, 0.0).unwrap();
                prop_assert_eq!(gg.len(), 1);
                let g = form.endpoint_gradient_raw(x, e, 0.0).unwrap();
                prop_assert_eq!(&gg.gradients[0], &g);
            }
        }
    }

    #[test]
    fn scaling_numerator_and_denominator_is_invariant(
        theta in consistent_theta(),
        lambda in 0.01f64..100.0,
    ) {
        // PN with an extra coordinate holding λ·P(x,y) as the denominator.
        let base = PocQuantity::Pn.form(&ThetaLayout::standard()).unwrap();
        let mut symbols: Vec<String> = theta.layout().symbols().to_vec();
        symbols.push("scaled_h".into());
        let layout = Arc::new(ThetaLayout::new(&symbols).unwrap());
        let scale = |terms: &[AffineTerm]| -> Vec<AffineTerm> {
            terms.iter().map(|t| {
                let mut coeffs: Vec<f64> = t.coeffs.iter().map(|c| c * lambda).collect();
                coeffs.push(0.0);
                AffineTerm { coeffs, offset: t.offset * lambda }
            }).collect()
        };
        let scaled = AffineBoundForm::new(
            layout,
            scale(base.terms(Endpoint::Upper)),
            scale(base.terms(Endpoint::Lower)),
            Denominator::Component(6),
        ).unwrap();
        let x = theta.values();
        let Ok(b) = base.evaluate_raw(x) else { return Ok(()) };
        let mut y = x.to_vec();
        y.push(lambda * x[2]);
        let s = scaled.evaluate_raw(&y).unwrap();
        prop_assert!((b.lower - s.lower).abs() <= 1e-12 && (b.upper - s.upper).abs() <= 1e-12,
            "{b:?} vs {s:?}");
    }
}

#[test]
fn oracle_agrees_on_response_type_draws() {
    let form = PocQuantity::Pns.form(&ThetaLayout::standard()).unwrap();
    let mut rng = stream_rng(2024, 0);
    for _ in 0..10_000 {
        let t = random_consistent_theta(&mut rng);
        let f = form.evaluate(&t).unwrap();
        let o = pns_sharp_oracle(&t, 1e-9).unwrap();
        assert!(o.lower <= o.upper);
        assert!((f.lower - o.lower).abs() <= 1e-6 && (f.upper - o.upper).abs() <= 1e-6);
    }
}
