//! Unit density, where the closed-form free problem is known.

use slscat::*;

#[test]
fn robin_free_problem_inverts_to_zero() {
    // y'(0) + 1.5 y(0) = 0: one bound state at 1.5 with m^2 = 3, and K = 0
    let p = DensityProfile::degenerate(1.0).unwrap();
    let q = PotentialSpec::zero();
    let c = BoundaryCoefficients::from_array([1.5, 0.0, 0.0, 1.0, 0.0, 0.0]);
    let mut cfg = NumericsConfig::default_for(&p, &q);
    cfg.h_x = 0.02;
    let sd = forward_scattering(&p, &q, &c, &cfg).unwrap();
    assert_eq!(sd.bound_states.len(), 1);
    assert!((sd.norming[0].powi(2) - 3.0).abs() < 1e-8);
    let inv = inverse(&sd, &p, &c, &cfg, FamilyOptions::default()).unwrap();
    let k = inv.kernel.rows.iter().flat_map(|r| r.values.iter()).fold(0.0f64, |m, v| m.max(v.abs()));
    let qm = inv.q_rec.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    assert!(k < 2e-4, "{k}");
    assert!(qm < 1e-3, "{qm}");
}

#[test]
fn quadratic_boundary_roots_are_simple() {
    // E(i mu) = mu^2 - 3 mu + 2
    let p = DensityProfile::degenerate(1.0).unwrap();
    let q = PotentialSpec::zero();
    let c = BoundaryCoefficients::from_array([2.0, 1.5, 0.0, 1.5, 1.0, 0.0]);
    let mut cfg = NumericsConfig::default_for(&p, &q);
    cfg.n_lambda = 64;
    let bs = bound_states_detailed(&p, &q, &c, &cfg).unwrap();
    let roots: Vec<f64> = bs.iter().map(|b| b.lambda_k).collect();
    assert_eq!(roots.len(), 2);
    assert!((roots[0] - 1.0).abs() < 1e-8 && (roots[1] - 2.0).abs() < 1e-8);
    assert!((bs[0].derivative + 1.0).abs() < 1e-6 && (bs[1].derivative - 1.0).abs() < 1e-6);
    assert_eq!(verify_zero_count(&p, &q, &c, &cfg).unwrap(), 2);
    assert!(bs.iter().all(|b| b.m_k > 0.0));
}

#[test]
fn soliton_kernel_at_coarse_step() {
    let (kappa, m2) = (0.7f64, 2.0f64);
    let p = DensityProfile::degenerate(1.0).unwrap();
    let c = BoundaryCoefficients::dirichlet();
    let mut cfg = NumericsConfig::default_for(&p, &PotentialSpec::zero());
    cfg.h_x = 0.025;
    cfg.n_lambda = 1024;
    let g = lambda_grid(cfg.lambda_max, cfg.n_lambda);
    let sd = ScatteringData {
        s_values: vec![Complex64::new(1.0, 0.0); g.len()],
        lambda_grid: g,
        bound_states: vec![kappa],
        norming: vec![m2.sqrt()],
    };
    let inv = inverse(&sd, &p, &c, &cfg, FamilyOptions::default()).unwrap();
    let qe: Vec<f64> = inv
        .kernel
        .x_nodes()
        .iter()
        .map(|&x| {
            let u = m2 * (-2.0 * kappa * x).exp();
            -4.0 * kappa * u / (1.0 + u / (2.0 * kappa)).powi(2)
        })
        .collect();
    let e = reconstruction_errors(inv.kernel.x_nodes(), &qe, &inv.q_rec);
    assert!(e.sup < 0.01, "{e:?}");
    assert_eq!(inv.jump_residual, 0.0);
}
