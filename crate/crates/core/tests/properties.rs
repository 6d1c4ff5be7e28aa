use proptest::prelude::*;
use slscat::*;

fn admissible(c: [f64; 6]) -> Option<BoundaryCoefficients> {
    let c = BoundaryCoefficients::from_array(c);
    validate_boundary(&c).ok().map(|_| c)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn free_wronskian_is_constant(
        alpha in prop_oneof![0.2f64..0.9, 1.1f64..4.0],
        a in 0.2f64..3.0,
        x in 0.0f64..6.0,
        l in 0.05f64..30.0,
    ) {
        let p = DensityProfile::new(alpha, a).unwrap();
        prop_assume!((x - a).abs() > 1e-9);
        let (e, de) = free_jost(&p, x, Complex64::new(l, 0.0)).unwrap();
        let (eb, deb) = free_jost(&p, x, Complex64::new(-l, 0.0)).unwrap();
        let w = de * eb - e * deb;
        prop_assert!((w - Complex64::new(0.0, 2.0 * l)).norm() < 1e-9 * (1.0 + l));
    }

    #[test]
    fn s_zero_is_hermitian(
        alpha in prop_oneof![0.2f64..0.9, 1.1f64..4.0],
        a in 0.2f64..3.0,
        c in proptest::array::uniform6(-2.0f64..2.0),
        l in 0.01f64..50.0,
    ) {
        let c = admissible(c);
        prop_assume!(c.is_some());
        let c = c.unwrap();
        let p = DensityProfile::new(alpha, a).unwrap();
        let s0 = SZero::new(&p, &c).unwrap();
        prop_assert!((s0.eval(-l) - s0.eval(l).conj()).norm() < 1e-12);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn free_dirichlet_data_are_s_zero(alpha in prop_oneof![0.3f64..0.9, 1.1f64..3.0], a in 0.5f64..2.0) {
        let p = DensityProfile::new(alpha, a).unwrap();
        let q = PotentialSpec::zero();
        let c = BoundaryCoefficients::dirichlet();
        let mut cfg = NumericsConfig::default_for(&p, &q);
        cfg.n_lambda = 32;
        let sd = forward_scattering(&p, &q, &c, &cfg).unwrap();
        prop_assert!(sd.bound_states.is_empty());
        let s0 = SZero::new(&p, &c).unwrap();
        for (l, s) in sd.lambda_grid.iter().zip(&sd.s_values) {
            prop_assert!((s - s0.eval(*l)).norm() < 1e-8, "lambda {l}: {s} vs {}", s0.eval(*l));
        }
    }
}
