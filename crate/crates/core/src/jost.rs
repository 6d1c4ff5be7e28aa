//! Free and numerical Jost solutions, the regular solution and the Wronskian.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::model::{BoundaryCoefficients, DensityProfile, NumericsConfig, PotentialSpec};
use crate::ode::{sweep, DenseSolution, Medium, OdeOptions};

/// Local error target of the integrator relative to `quad_tol`.
const ODE_TOL_FACTOR: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq)]
pub struct JostSample {
    pub lambda: Complex64,
    pub e_at_zero: Complex64,
    pub e_prime_at_zero: Complex64,
    /// `(x, e(x), e'(x))` on the trace grid.
    pub trace: Vec<(f64, Complex64, Complex64)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegularSample {
    pub lambda: Complex64,
    pub trace: Vec<(f64, Complex64, Complex64)>,
}

/// `e0(x, lambda)` and its x-derivative.
pub fn free_jost(p: &DensityProfile, x: f64, lambda: Complex64) -> Result<(Complex64, Complex64)> {
    let (mp, mm) = p.mu_pm(x)?;
    let (wa, wb) = p.weights(x);
    let s = p.sqrt_rho(x);
    let i = Complex64::i();
    let ep = (i * lambda * mp).exp();
    let em = (i * lambda * mm).exp();
    let e = wa * ep + wb * em;
    let d = i * lambda * s * (wa * ep - wb * em);
    Ok((e, d))
}

/// Uniform grid on `[0, a]` and on `[a, x_max]` with step close to `h_x`.
pub fn trace_grid(p: &DensityProfile, cfg: &NumericsConfig) -> Vec<f64> {
    let a = p.a();
    let n1 = ((a / cfg.h_x).round() as usize).max(1);
    let n2 = (((cfg.x_max - a) / cfg.h_x).round() as usize).max(1);
    let mut g: Vec<f64> = (0..n1).map(|i| a * i as f64 / n1 as f64).collect();
    g.extend((0..=n2).map(|i| a + (cfg.x_max - a) * i as f64 / n2 as f64));
    g
}

/// Reusable integrator for one `(rho, q, numerics)` triple.
#[derive(Debug, Clone)]
pub struct JostSolver {
    profile: DensityProfile,
    x_start: f64,
    x_max: f64,
    grid: Vec<f64>,
    medium: Medium,
    traced: Medium,
    opts: OdeOptions,
}

impl JostSolver {
    pub fn new(p: &DensityProfile, q: &PotentialSpec, cfg: &NumericsConfig) -> Result<Self> {
        let bound = p.a().max(q.effective_support());
        if !(cfg.x_max > bound) {
            return Err(Error::TruncationTooSmall { x_max: cfg.x_max, bound });
        }
        // beyond x_start the solution is exactly exp(i lambda x)
        let x_start = bound;
        let grid = trace_grid(p, cfg);
        let inner: Vec<f64> = grid.iter().copied().filter(|&x| x < x_start).collect();
        Ok(Self {
            profile: *p,
            x_start,
            x_max: cfg.x_max,
            medium: Medium::new(p, q, x_start, &[]),
            traced: Medium::new(p, q, x_start, &inner),
            grid,
            opts: OdeOptions { tol: cfg.quad_tol * ODE_TOL_FACTOR, max_steps: 2_000_000 },
        })
    }

    pub fn profile(&self) -> &DensityProfile {
        &self.profile
    }

    pub fn x_start(&self) -> f64 {
        self.x_start
    }

    pub fn x_max(&self) -> f64 {
        self.x_max
    }

    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    /// Start of the backward sweep, scaled by `exp(-i lambda x_start)`.
    fn start(&self, lambda: Complex64) -> (Complex64, Complex64, Complex64) {
        let i = Complex64::i();
        let scale = (i * lambda * self.x_start).exp();
        (Complex64::new(1.0, 0.0), i * lambda, scale)
    }

    /// `(e(0, lambda), e'(0, lambda))`.
    pub fn at_origin(&self, lambda: Complex64) -> Result<(Complex64, Complex64)> {
        let (u, v, scale) = self.start(lambda);
        let s = sweep(&self.medium, lambda, u, v, true, &self.opts, false)?;
        Ok((s.u * scale, s.v * scale))
    }

    /// Full sample with trace on the grid.
    pub fn sample(&self, lambda: Complex64) -> Result<JostSample> {
        let (u, v, scale) = self.start(lambda);
        let s = sweep(&self.traced, lambda, u, v, true, &self.opts, false)?;
        let i = Complex64::i();
        let mut trace = Vec::with_capacity(self.grid.len());
        let mut nodes = s.nodes.iter().rev().peekable();
        for &x in &self.grid {
            if x < self.x_start {
                while let Some(n) = nodes.peek() {
                    if n.0 < x {
                        nodes.next();
                    } else {
                        break;
                    }
                }
                let n = nodes.peek().expect("trace node");
                trace.push((x, n.1 * scale, n.2 * scale));
            } else {
                let e = (i * lambda * x).exp();
                trace.push((x, e, i * lambda * e));
            }
        }
        Ok(JostSample { lambda, e_at_zero: s.u * scale, e_prime_at_zero: s.v * scale, trace })
    }

    /// Dense solution on `[0, x_start]` together with the scale factor that
    /// must multiply it.
    pub fn dense(&self, lambda: Complex64) -> Result<(DenseSolution, Complex64)> {
        let (u, v, scale) = self.start(lambda);
        let s = sweep(&self.medium, lambda, u, v, true, &self.opts, true)?;
        Ok((s.dense.unwrap_or_default(), scale))
    }

    /// Regular solution from the boundary data, traced on the grid.
    pub fn regular(&self, q: &PotentialSpec, c: &BoundaryCoefficients, lambda: Complex64) -> Result<RegularSample> {
        let full = Medium::new(&self.profile, q, self.x_max, &self.grid);
        let w0 = c.beta_poly(lambda);
        let w1 = -c.alpha_poly(lambda);
        let s = sweep(&full, lambda, w0, w1, false, &self.opts, false)?;
        let mut trace = Vec::with_capacity(self.grid.len());
        let mut nodes = s.nodes.iter().peekable();
        for &x in &self.grid {
            while let Some(n) = nodes.peek() {
                if n.0 < x {
                    nodes.next();
                } else {
                    break;
                }
            }
            let n = nodes.peek().expect("trace node");
            trace.push((x, n.1, n.2));
        }
        Ok(RegularSample { lambda, trace })
    }
}

/// `e(x, lambda)` by backward integration from `x_max`.
pub fn jost_solution(p: &DensityProfile, q: &PotentialSpec, lambda: Complex64, cfg: &NumericsConfig) -> Result<JostSample> {
    JostSolver::new(p, q, cfg)?.sample(lambda)
}

/// `w(x, lambda)` with `w(0) = beta(lambda)`, `w'(0) = -alpha(lambda)`.
pub fn regular_solution(
    p: &DensityProfile,
    q: &PotentialSpec,
    c: &BoundaryCoefficients,
    lambda: Complex64,
    cfg: &NumericsConfig,
) -> Result<RegularSample> {
    JostSolver::new(p, q, cfg)?.regular(q, c, lambda)
}

/// `e'(x) ebar(x) - e(x) ebar'(x)` per trace node, with `ebar` the sample
/// at `-lambda` (for real lambda the complex conjugate of `e`).
pub fn wronskian(e: &JostSample, ebar: &JostSample) -> Vec<Complex64> {
    e.trace
        .iter()
        .zip(&ebar.trace)
        .map(|(&(_, u, du), &(_, w, dw))| du * w - u * dw)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn setup() -> (DensityProfile, PotentialSpec, NumericsConfig) {
        let p = DensityProfile::new(2.0, 1.0).unwrap();
        let q = PotentialSpec::zero();
        let cfg = NumericsConfig::default_for(&p, &q);
        (p, q, cfg)
    }

    #[test]
    fn free_values() {
        let (p, _, _) = setup();
        let (e, _) = free_jost(&p, 0.0, Complex64::new(0.0, 0.0)).unwrap();
        assert!((e - 1.0).norm() < 1e-15);
        let (e, _) = free_jost(&p, 0.0, Complex64::new(PI, 0.0)).unwrap();
        assert!((e + 1.0).norm() < 1e-14);
        let l = Complex64::new(1.7, 0.0);
        let (e, d) = free_jost(&p, 2.3, l).unwrap();
        let ex = (Complex64::i() * l * 2.3).exp();
        assert!((e - ex).norm() < 1e-15 && (d - Complex64::i() * l * ex).norm() < 1e-14);
    }

    #[test]
    fn free_continuous_at_a() {
        let (p, _, _) = setup();
        let l = Complex64::new(3.1, 0.2);
        let (e1, d1) = free_jost(&p, 1.0 - 1e-12, l).unwrap();
        let (e2, d2) = free_jost(&p, 1.0, l).unwrap();
        assert!((e1 - e2).norm() < 1e-10 && (d1 - d2).norm() < 1e-10);
    }

    #[test]
    fn zero_potential_reproduces_free() {
        let (p, q, cfg) = setup();
        for l in [2.0, PI, -0.7] {
            let lam = Complex64::new(l, 0.0);
            let s = jost_solution(&p, &q, lam, &cfg).unwrap();
            for &(x, e, d) in &s.trace {
                let (e0, d0) = free_jost(&p, x, lam).unwrap();
                assert!((e - e0).norm() < cfg.quad_tol, "x={x}");
                assert!((d - d0).norm() < cfg.quad_tol * (1.0 + l.abs()));
            }
        }
        let s = jost_solution(&p, &q, Complex64::new(PI, 0.0), &cfg).unwrap();
        assert!((s.e_at_zero + 1.0).norm() < cfg.quad_tol);
    }

    #[test]
    fn wronskian_free_case() {
        let (p, q, cfg) = setup();
        let e = jost_solution(&p, &q, Complex64::new(1.0, 0.0), &cfg).unwrap();
        let eb = jost_solution(&p, &q, Complex64::new(-1.0, 0.0), &cfg).unwrap();
        for w in wronskian(&e, &eb) {
            assert!((w - Complex64::new(0.0, 2.0)).norm() < 1e-12);
        }
        for w in wronskian(&eb, &e) {
            assert!((w - Complex64::new(0.0, -2.0)).norm() < 1e-12);
        }
    }

    #[test]
    fn imaginary_lambda_gives_real_trace() {
        let p = DensityProfile::new(2.0, 1.0).unwrap();
        let q = PotentialSpec::from_fn(2.0, 40, |x| -3.0 * (-(x - 1.2f64).powi(2) * 8.0).exp()).unwrap();
        let cfg = NumericsConfig::default_for(&p, &q);
        let s = jost_solution(&p, &q, Complex64::new(0.0, 1.3), &cfg).unwrap();
        for &(_, e, d) in &s.trace {
            assert!(e.im.abs() <= cfg.solve_tol * e.norm().max(1.0));
            assert!(d.im.abs() <= cfg.solve_tol * d.norm().max(1.0));
        }
    }

    #[test]
    fn regular_initial_values() {
        let (p, q, cfg) = setup();
        let c = BoundaryCoefficients::dirichlet();
        let w = regular_solution(&p, &q, &c, Complex64::new(1.5, 0.0), &cfg).unwrap();
        assert_eq!(w.trace[0].1, Complex64::new(0.0, 0.0));
        assert_eq!(w.trace[0].2, Complex64::new(-1.0, 0.0));
        let c = BoundaryCoefficients::from_array([0.0, 0.0, 0.0, 1.0, 0.0, 0.0]);
        let w = regular_solution(&p, &q, &c, Complex64::new(3.0, 0.0), &cfg).unwrap();
        assert_eq!(w.trace[0].1, Complex64::new(1.0, 0.0));
        assert_eq!(w.trace[0].2, Complex64::new(0.0, 0.0));
    }

    #[test]
    fn truncation_checked() {
        let (p, q, mut cfg) = setup();
        cfg.x_max = 0.9;
        assert!(matches!(jost_solution(&p, &q, Complex64::new(1.0, 0.0), &cfg), Err(Error::TruncationTooSmall { .. })));
    }
}
