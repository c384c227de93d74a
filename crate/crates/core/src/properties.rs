//! Randomized invariants across modules.

use std::sync::Arc;

use proptest::prelude::*;

use crate::amalgam::{check_embedding, partition, young_check};
use crate::commutator::{verify_binomial_expansion, PositionMultiplier};
use crate::grid::{build_domain, GridDomain, GridFunction, Potential, ShapeSpec};
use crate::multiplier::SchwartzProfile;
use crate::operator::{assemble_hv, decompose, form_identity_check};
use crate::resolvent::resolvent_bounds;
use crate::semigroup::heat_operator;
use crate::sweep::fit_loglog;
use crate::Exponent;

fn segment(len: f64, h: f64) -> Arc<GridDomain> {
    build_domain(
        &ShapeSpec::Box {
            lower: vec![0.0],
            upper: vec![len],
        },
        h,
    )
    .unwrap()
}

fn exponent() -> impl Strategy<Value = Exponent> {
    (0.0f64..=1.0).prop_map(|r| Exponent::from_recip(r).unwrap())
}

fn nonneg_potential(dom: &Arc<GridDomain>, a: f64, b: f64) -> Potential {
    Potential::from_fn(dom.clone(), |x| a * (b * x.iter().sum::<f64>()).sin().powi(2)).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn exponent_roundtrip(p in exponent()) {
        let back = Exponent::from_recip(p.recip()).unwrap();
        prop_assert!((back.recip() - p.recip()).abs() < 1e-15);
        prop_assert!((p.conjugate().conjugate().recip() - p.recip()).abs() < 1e-15);
    }

    #[test]
    fn loglog_fit_recovers_power(a in -3.0f64..3.0, c in 0.1f64..10.0) {
        let xs: Vec<f64> = (0..6).map(|i| 0.01 * 3f64.powi(i)).collect();
        let ys: Vec<f64> = xs.iter().map(|x| c * x.powf(a)).collect();
        prop_assert!((fit_loglog(&xs, &ys).unwrap() - a).abs() < 1e-10);
    }

    #[test]
    fn gaussian_fourier_closed_form(a in 0.2f64..5.0, t in -8.0f64..8.0) {
        let ft = SchwartzProfile::gaussian(a).fourier(t);
        let exact = (2.0 * a).powf(-0.5) * (-t * t / (4.0 * a)).exp();
        prop_assert!((ft.re - exact).abs() < 1e-12 && ft.im.abs() < 1e-12);
    }

    #[test]
    fn young_inequality_d1(
        vf in prop::collection::vec(-1.0f64..1.0, 31),
        vg in prop::collection::vec(-1.0f64..1.0, 15),
        sigma in 0.05f64..0.9,
        p1 in exponent(), q1 in exponent(), s in 0.0f64..=1.0, t in 0.0f64..=1.0,
    ) {
        let h = 1.0 / 32.0;
        let (df, dg) = (segment(1.0, h), segment(0.5, h));
        let f = GridFunction::new(df.clone(), vf).unwrap();
        let g = GridFunction::new(dg, vg).unwrap();
        // second exponents chosen so both Young conditions hold
        let p2 = Exponent::from_recip(1.0 - p1.recip() + s * p1.recip()).unwrap();
        let q2 = Exponent::from_recip(1.0 - q1.recip() + t * q1.recip()).unwrap();
        let part = partition(&df, sigma * sigma).unwrap();
        let r = young_check(&f, &g, p1, q1, p2, q2, &part).unwrap();
        prop_assert!(r.passed(), "{}", r.summary());
    }

    #[test]
    fn amalgam_embedding(
        v in prop::collection::vec(-1.0f64..1.0, 31),
        sigma in 0.05f64..0.9,
        p in exponent(), q in exponent(),
    ) {
        let (p, q) = if p.recip() >= q.recip() { (p, q) } else { (q, p) };
        let dom = segment(1.0, 1.0 / 32.0);
        let f = GridFunction::new(dom.clone(), v).unwrap();
        let part = partition(&dom, sigma * sigma).unwrap();
        let r = check_embedding(&f, p, q, &part).unwrap();
        prop_assert!(r.passed(), "{}", r.summary());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn form_matches_matrix(a in 0.0f64..20.0, b in 0.5f64..6.0, seed in any::<u64>()) {
        let dom = build_domain(&ShapeSpec::unit_box(2), 1.0 / 8.0).unwrap();
        let v = Potential::from_fn(dom, |x| a * (b * x[0]).cos() - 0.3 * a * x[1]).unwrap();
        let r = form_identity_check(&v, 4, seed).unwrap();
        prop_assert!(r.passed(), "{}", r.summary());
    }

    #[test]
    fn heat_is_positive_and_contractive(a in 0.0f64..30.0, b in 0.5f64..8.0, t in 0.001f64..1.0) {
        let dom = build_domain(&ShapeSpec::unit_box(2), 1.0 / 8.0).unwrap();
        let v = nonneg_potential(&dom, a, b);
        let dec = decompose(&assemble_hv(&dom, &v).unwrap()).unwrap();
        let k = heat_operator(&dec, t).unwrap();
        let m = k.matrix();
        for i in 0..m.nrows() {
            let mut row = 0.0;
            for j in 0..m.ncols() {
                prop_assert!(m[(i, j)] >= -1e-12);
                row += m[(i, j)];
            }
            prop_assert!(row <= 1.0 + 1e-12);
        }
    }

    #[test]
    fn resolvent_bounds_for_nonnegative_potential(
        a in 0.0f64..30.0, b in 0.5f64..8.0, ltheta in -2.0f64..2.0, m in 0.1f64..10.0,
    ) {
        let dom = build_domain(&ShapeSpec::unit_box(2), 1.0 / 8.0).unwrap();
        let v = nonneg_potential(&dom, a, b);
        let dec = decompose(&assemble_hv(&dom, &v).unwrap()).unwrap();
        let r = resolvent_bounds(&dec, &v, 10f64.powf(ltheta), m).unwrap();
        prop_assert!(r.resolvent.passed(), "{}", r.resolvent.summary());
        prop_assert!(r.gradient.passed(), "{}", r.gradient.summary());
    }

    #[test]
    fn binomial_expansion_any_multiplier(axis in 0usize..2, offset in -1.0f64..2.0, a in 0.0f64..10.0) {
        let dom = build_domain(&ShapeSpec::unit_box(2), 1.0 / 6.0).unwrap();
        let v = Potential::from_fn(dom.clone(), |x| a * x[0] * x[1]).unwrap();
        let h = assemble_hv(&dom, &v).unwrap();
        let r = verify_binomial_expansion(&h, PositionMultiplier::new(axis, offset), 4).unwrap();
        prop_assert!(r.passed(), "{}", r.summary());
    }
}
