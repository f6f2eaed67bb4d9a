mod common;

use common::random_model;
use proptest::prelude::*;
use qsdlab_core::htransform::{h_transform, hitting_prob};
use qsdlab_core::model::{exit_states, make_family, truncate, ModelFamily, ModelFamilySpec};
use qsdlab_core::spectral::{
    classify, decay_parameter, embedded_chain, spectral_radius, ClassifyOptions, DecayMethod, DecayOptions,
};

fn any_family() -> impl Strategy<Value = ModelFamily> {
    prop_oneof![
        (0.05f64..0.6, 0.0f64..0.3).prop_map(|(p, r)| ModelFamily::FeedbackChain { p, r, w: 1.0 - p - r }),
        (0.05f64..0.95, 0.2f64..3.0).prop_map(|(p, c)| ModelFamily::BdLine { p, c }),
        (0.05f64..0.95, 0.2f64..3.0).prop_map(|(p, c)| ModelFamily::BdHalfline { p, c }),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn rows_are_conservative(seed in 0u64..10_000) {
        let m = random_model(seed, 3, 40);
        for i in 0..m.n() {
            let out: f64 = m.row(i).iter().map(|&(_, r)| r).sum::<f64>() + m.kill(i);
            prop_assert!((out - m.total(i)).abs() <= 1e-12 * m.total(i));
            prop_assert!(m.row(i).iter().all(|&(j, r)| j != i && r > 0.0));
        }
        prop_assert_eq!(&exit_states(&m), m.exit_set());
        prop_assert!(!m.exit_set().is_empty());
    }

    #[test]
    fn radius_increases_with_shift(seed in 0u64..10_000, a in 0.0f64..0.9, b in 0.0f64..0.9) {
        let m = random_model(seed, 3, 30);
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        let qmin = m.min_total_rate();
        let r_lo = spectral_radius(&embedded_chain(&m, lo * qmin).unwrap(), 1e-13, 1_000_000).unwrap();
        let r_hi = spectral_radius(&embedded_chain(&m, hi * qmin).unwrap(), 1e-13, 1_000_000).unwrap();
        prop_assert!(r_lo.rho <= r_hi.rho + 1e-9, "{} > {}", r_lo.rho, r_hi.rho);
    }

    #[test]
    fn return_mass_at_lambda_is_at_most_one(seed in 0u64..10_000) {
        let m = random_model(seed, 3, 30);
        let d = decay_parameter(&m, &DecayOptions { method: DecayMethod::FiniteEigen, ..DecayOptions::default() }).unwrap();
        let opts = ClassifyOptions::default();
        let v = classify(&m, d.lambda, m.default_anchor(), &opts).unwrap();
        prop_assert!(v.f_kk_at_lambda <= 1.0 + opts.tol);
    }

    #[test]
    fn identity_h_transform_is_a_no_op(seed in 0u64..10_000) {
        let m = random_model(seed, 3, 30);
        let mut h = hitting_prob(&m, 0, 1e-14, 100_000).unwrap();
        h.values.iter_mut().for_each(|v| *v = 1.0);
        let s = h_transform(&m, 0, &h).unwrap();
        prop_assert_eq!(s.model, m);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn truncations_decrease_lambda(f in any_family(), n in 8usize..60) {
        let big = make_family(&ModelFamilySpec::new(f, 2 * n)).unwrap();
        let small = truncate(&big, n).unwrap();
        prop_assert_eq!(&small, &make_family(&ModelFamilySpec::new(f, n)).unwrap());
        let opts = DecayOptions { method: DecayMethod::FiniteEigen, ..DecayOptions::default() };
        let l_small = decay_parameter(&small, &opts).unwrap().lambda;
        let l_big = decay_parameter(&big, &opts).unwrap().lambda;
        prop_assert!(l_big <= l_small + 1e-9, "{l_big} > {l_small}");
        for i in 0..small.n() {
            let j = big.position_of_label(small.label(i)).unwrap();
            prop_assert!(small.kill(i) >= big.kill(j));
        }
    }
}
