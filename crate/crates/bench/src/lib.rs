//! Shared problem setups for the benchmarks.

use slscat::{BoundaryCoefficients, DensityProfile, NumericsConfig, PotentialSpec};

pub struct Setup {
    pub profile: DensityProfile,
    pub boundary: BoundaryCoefficients,
    pub potential: PotentialSpec,
    pub numerics: NumericsConfig,
}

/// Smooth bump of height 1 on `[1.5, 3.5]` behind a density step `alpha = 2, a = 1`,
/// Dirichlet end, with `h_x` and `n_lambda` as given.
pub fn gaussian_step(h_x: f64, n_lambda: usize) -> Setup {
    let profile = DensityProfile::new(2.0, 1.0).expect("valid profile");
    let e = |t: f64| (-(t - 2.5) * (t - 2.5) / (2.0 * 0.25 * 0.25)).exp();
    let potential = PotentialSpec::from_fn(3.5, 700, |x| {
        if (1.5..=3.5).contains(&x) {
            (e(x) - e(1.5)) / (1.0 - e(1.5))
        } else {
            0.0
        }
    })
    .expect("valid potential");
    let mut numerics = NumericsConfig::default_for(&profile, &potential);
    numerics.h_x = h_x;
    numerics.n_lambda = n_lambda;
    Setup { profile, boundary: BoundaryCoefficients::dirichlet(), potential, numerics }
}
