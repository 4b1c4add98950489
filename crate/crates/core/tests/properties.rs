use std::collections::BTreeMap;
use std::sync::Arc;

use nalgebra::DVector;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use lgbundle::calculus::Polynomial;
use lgbundle::liegroup::{AlgebraElement, GroupDescriptor};
use lgbundle::principal::Weight;
use lgbundle::report::RunReport;
use lgbundle::scenarios::gauge::{JetGaugeGroup, Utiyama};
use lgbundle::suite::{check_seed, CheckRecord};

fn algebra(max: f64) -> impl Strategy<Value = [f64; 3]> {
    prop::array::uniform3(-max..max)
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn so3_log_inverts_exp(v in algebra(1.7)) {
        let g = GroupDescriptor::so3();
        let xi = AlgebraElement::from_slice(&v);
        let back = g.log(&g.exp(&xi).unwrap()).unwrap();
        prop_assert!(back.distance(&xi) < 1e-12);
    }

    #[test]
    fn adjoint_is_a_homomorphism_preserving_brackets(a in algebra(1.5), b in algebra(1.5), x in algebra(2.0), y in algebra(2.0)) {
        let g = GroupDescriptor::so3();
        let ga = g.exp(&AlgebraElement::from_slice(&a)).unwrap();
        let gb = g.exp(&AlgebraElement::from_slice(&b)).unwrap();
        let x = AlgebraElement::from_slice(&x);
        let y = AlgebraElement::from_slice(&y);
        let lhs = g.adjoint(&g.compose(&ga, &gb), &x).unwrap();
        let rhs = g.adjoint(&ga, &g.adjoint(&gb, &x).unwrap()).unwrap();
        prop_assert!(lhs.distance(&rhs) < 1e-12);
        let moved = g.bracket(&g.adjoint(&ga, &x).unwrap(), &g.adjoint(&ga, &y).unwrap());
        prop_assert!(moved.distance(&g.adjoint(&ga, &g.bracket(&x, &y)).unwrap()) < 1e-12);
    }

    #[test]
    fn so4_bracket_satisfies_jacobi(seed in any::<u64>()) {
        let g = GroupDescriptor::so(4).unwrap();
        let mut r = rng(seed);
        let (x, y, z) = (g.sample_algebra(&mut r, 1.0), g.sample_algebra(&mut r, 1.0), g.sample_algebra(&mut r, 1.0));
        let s = g.bracket(&x, &g.bracket(&y, &z)) + g.bracket(&y, &g.bracket(&z, &x)) + g.bracket(&z, &g.bracket(&x, &y));
        prop_assert!(s.norm() < 1e-13);
    }

    #[test]
    fn polynomial_tables_round_trip(terms in prop::collection::btree_map((0u32..4, 0u32..4), -2.0f64..2.0, 0..6), x in -1.0f64..1.0, y in -1.0f64..1.0) {
        let table: BTreeMap<String, f64> = terms.iter().map(|((i, j), c)| (format!("{i},{j}"), *c)).collect();
        let p = Polynomial::from_table(&table, 2).unwrap();
        let q = Polynomial::from_table(&p.to_table(), 2).unwrap();
        let direct: f64 = terms.iter().map(|((i, j), c)| c * x.powi(*i as i32) * y.powi(*j as i32)).sum();
        prop_assert!((p.eval(&[x, y]) - direct).abs() < 1e-12);
        prop_assert!((q.eval(&[x, y]) - direct).abs() < 1e-12);
    }

    #[test]
    fn smooth_weights_form_a_partition(lower in -1.0f64..0.0, width in 0.05f64..1.0, x in -2.0f64..2.0) {
        let upper = lower + width;
        let fall = Weight::SmoothFall { axis: 0, lower, upper };
        let rise = Weight::SmoothRise { axis: 0, lower, upper };
        let p = DVector::from_vec(vec![x, 0.0]);
        let (a, b) = (fall.eval(&p), rise.eval(&p));
        prop_assert!((0.0..=1.0).contains(&a));
        prop_assert!((a + b - 1.0).abs() < 1e-15);
        if x <= lower {
            prop_assert_eq!(a, 1.0);
        }
        if x >= upper {
            prop_assert_eq!(a, 0.0);
        }
    }

    #[test]
    fn jet_gauge_group_is_associative_with_inverses(seed in any::<u64>()) {
        let jets = JetGaugeGroup::new(Arc::new(GroupDescriptor::so3()), 3).unwrap();
        let mut r = rng(seed);
        let (a, b, c) = (jets.sample(&mut r), jets.sample(&mut r), jets.sample(&mut r));
        let left = jets.mul(&jets.mul(&a, &b).unwrap(), &c).unwrap();
        let right = jets.mul(&a, &jets.mul(&b, &c).unwrap()).unwrap();
        prop_assert!(left.distance(&right) < 1e-12);
        let unit = jets.mul(&a, &jets.inverse(&a).unwrap()).unwrap();
        prop_assert!(unit.distance(&jets.identity()) < 1e-12);
    }

    #[test]
    fn utiyama_curvature_is_gauge_invariant(seed in any::<u64>()) {
        let u = Utiyama::new(JetGaugeGroup::new(Arc::new(GroupDescriptor::so3()), 3).unwrap());
        let mut r = rng(seed);
        let jet = u.sample_jet(&mut r);
        let gauge = u.sample_gauge(&mut r);
        prop_assert!(u.invariance_check(&gauge, &jet).unwrap() <= 1e-12);
    }

    #[test]
    fn abelian_jet_lift_is_multiplicative(seed in any::<u64>()) {
        let jets = JetGaugeGroup::new(Arc::new(GroupDescriptor::preset("r3").unwrap()), 2).unwrap();
        let mut r = rng(seed);
        let (a, b) = (jets.sample(&mut r), jets.sample(&mut r));
        prop_assert!(jets.lift_multiplicativity(&a, &b).unwrap() <= 1e-12);
    }

    #[test]
    fn check_seeds_separate_ids_and_runs(seed in any::<u64>()) {
        prop_assert_ne!(check_seed(seed, "transport_identities"), check_seed(seed, "transport_identitie"));
        prop_assert_ne!(check_seed(seed, "a"), check_seed(seed.wrapping_add(1), "a"));
    }

    #[test]
    fn reports_round_trip_and_audit_clean(residuals in prop::collection::vec((1e-16f64..1.0, 1e-12f64..1e-2), 1..8)) {
        let records: Vec<CheckRecord> = residuals
            .iter()
            .enumerate()
            .map(|(i, (r, tol))| CheckRecord {
                check: format!("check_{i}"),
                anchor: "property".into(),
                scenario: "s".into(),
                samples: 3,
                max_residual: Some(*r),
                mean_residual: Some(r / 2.0),
                order_estimate: None,
                order_required: None,
                tolerance: *tol,
                expect_failure: false,
                pass: r <= tol,
                detail: None,
            })
            .collect();
        let report = RunReport::new("s", "principal", 7, 3, 1e-3, records);
        let back = RunReport::from_jsonl(&report.to_jsonl()).unwrap();
        prop_assert_eq!(&back, &report);
        prop_assert!(back.audit().is_empty());
    }
}
