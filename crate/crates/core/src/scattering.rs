//! Characteristic function, scattering function, bound states and
//! normalizing numbers.

use num_complex::Complex64;
use rayon::prelude::*;
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::jost::{JostSample, JostSolver};
use crate::model::{
    lambda_grid, validate_boundary, BoundaryCoefficients, DensityProfile, NumericsConfig, PotentialSpec,
    ScatteringData,
};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CharacteristicValue {
    pub lambda: Complex64,
    pub e: Complex64,
    /// Present when `E != 0`.
    pub s: Option<Complex64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundState {
    pub lambda_k: f64,
    pub m_k: f64,
    /// Centered difference of `mu -> E(i mu)` at `lambda_k`.
    pub derivative: f64,
    /// `(x, e(x, i lambda_k))` on the trace grid.
    pub e_trace: Vec<(f64, f64)>,
}

fn char_from(c: &BoundaryCoefficients, l: Complex64, e: Complex64, de: Complex64) -> (Complex64, Complex64) {
    let b = c.beta_poly(l);
    let a = c.alpha_poly(l);
    (b * de + a * e, b * de.conj() + a * e.conj())
}

/// `E` and `S` from a Jost sample.
pub fn characteristic(c: &BoundaryCoefficients, j: &JostSample, root_tol: f64) -> Result<CharacteristicValue> {
    let (e, num) = char_from(c, j.lambda, j.e_at_zero, j.e_prime_at_zero);
    let real = j.lambda.im == 0.0;
    if e.norm() <= root_tol {
        if real {
            return Err(Error::CharacteristicVanishes { lambda: j.lambda.re, modulus: e.norm() });
        }
        return Ok(CharacteristicValue { lambda: j.lambda, e, s: None });
    }
    Ok(CharacteristicValue { lambda: j.lambda, e, s: real.then(|| num / e) })
}

/// `E(lambda)` at any complex `lambda`.
pub fn characteristic_at(solver: &JostSolver, c: &BoundaryCoefficients, lambda: Complex64) -> Result<Complex64> {
    let (e, de) = solver.at_origin(lambda)?;
    Ok(c.beta_poly(lambda) * de + c.alpha_poly(lambda) * e)
}

/// Large-|lambda| form of `S`: `exp(-2 i l mu+(0)) (m + tau Zbar) / (1 + m tau Z)`
/// with `Z = exp(2 i l alpha a)`. The real mix `m` is `+1` when the value
/// term of the boundary condition dominates, `-1` when the derivative term
/// does, and a ratio of leading coefficients when both grow alike.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SZero {
    pub mix: f64,
    pub tau: f64,
    pub mu0: f64,
    pub period: f64,
}

fn degree(v: [f64; 3]) -> Option<usize> {
    (0..3).rev().find(|&k| v[k] != 0.0)
}

impl SZero {
    pub fn new(p: &DensityProfile, c: &BoundaryCoefficients) -> Result<Self> {
        let av = [c.alpha0, c.alpha1, c.alpha2];
        let bv = [c.beta0, c.beta1, c.beta2];
        let mix = match (degree(av), degree(bv)) {
            (_, None) => 1.0,
            (None, Some(_)) => -1.0,
            (Some(da), Some(db)) if db + 1 > da => -1.0,
            (Some(da), Some(db)) if da > db + 1 => 1.0,
            (Some(da), Some(db)) => {
                let top_a = av[da];
                let top_b = p.alpha() * bv[db];
                if top_a + top_b == 0.0 {
                    return Err(Error::UnsupportedAsymptotics(
                        "leading boundary terms cancel; S0 undefined".into(),
                    ));
                }
                (top_a - top_b) / (top_a + top_b)
            }
        };
        let tau = p.tau();
        if (mix * tau).abs() >= 1.0 {
            return Err(Error::UnsupportedAsymptotics(format!(
                "|mix * tau| = {} >= 1 for the boundary coefficients",
                (mix * tau).abs()
            )));
        }
        Ok(Self { mix, tau, mu0: p.mu_pm_unchecked(0.0).0, period: 2.0 * p.alpha() * p.a() })
    }

    pub fn eval(&self, l: f64) -> Complex64 {
        let i = Complex64::i();
        let xb2 = (-2.0 * i * l * self.mu0).exp();
        let z = (i * l * self.period).exp();
        xb2 * (self.mix + self.tau * z.conj()) / (1.0 + self.mix * self.tau * z)
    }
}

/// `S0(lambda)` for real `lambda`.
pub fn s_zero(p: &DensityProfile, c: &BoundaryCoefficients, lambda: f64) -> Result<Complex64> {
    Ok(SZero::new(p, c)?.eval(lambda))
}

/// Default search ceiling: a Weyl-type bound from `q` plus `1/a + 1`, plus the
/// Cauchy root bound of the boundary polynomials seen through the free
/// solution.
pub fn default_mu_max(p: &DensityProfile, q: &PotentialSpec, c: &BoundaryCoefficients) -> f64 {
    let mut worst: f64 = 0.0;
    for (&x, &v) in q.grid().iter().zip(q.values()) {
        let rho = p.sqrt_rho(x).powi(2);
        worst = worst.max(-v / rho);
    }
    let mut cauchy: f64 = 0.0;
    for nu in [p.alpha(), 1.0] {
        // alpha(i mu) - nu mu beta(i mu) as a polynomial in mu
        let poly = [c.alpha0, -c.alpha1 - nu * c.beta0, -c.alpha2 + nu * c.beta1, nu * c.beta2];
        if let Some(d) = (0..4).rev().find(|&k| poly[k] != 0.0) {
            if d > 0 {
                let lead = poly[d].abs();
                let m = (0..d).map(|k| poly[k].abs() / lead).fold(0.0, f64::max);
                cauchy = cauchy.max(1.0 + m);
            }
        }
    }
    worst.sqrt() + 1.0 / p.a() + 1.0 + cauchy
}

fn e_imag(solver: &JostSolver, c: &BoundaryCoefficients, mu: f64) -> Result<f64> {
    Ok(characteristic_at(solver, c, Complex64::new(0.0, mu))?.re)
}

fn scan_floor(cfg: &NumericsConfig) -> f64 {
    100.0 * cfg.root_tol
}

/// Positive `lambda_k` with `E(i lambda_k) = 0`, ascending.
pub fn find_bound_states(
    p: &DensityProfile,
    q: &PotentialSpec,
    c: &BoundaryCoefficients,
    cfg: &NumericsConfig,
) -> Result<Vec<f64>> {
    let solver = JostSolver::new(p, q, cfg)?;
    find_with(&solver, p, q, c, cfg)
}

fn find_with(
    solver: &JostSolver,
    p: &DensityProfile,
    q: &PotentialSpec,
    c: &BoundaryCoefficients,
    cfg: &NumericsConfig,
) -> Result<Vec<f64>> {
    let mu_max = cfg.mu_max.unwrap_or_else(|| default_mu_max(p, q, c));
    let lo = scan_floor(cfg);
    let n = ((mu_max - lo) / (p.a() / 50.0)).ceil().max(8.0) as usize;
    let mus: Vec<f64> = (0..=n).map(|j| lo + (mu_max - lo) * j as f64 / n as f64).collect();
    let vals = mus.par_iter().map(|&m| e_imag(solver, c, m)).collect::<Result<Vec<f64>>>()?;
    let mut roots = Vec::new();
    for j in 0..n {
        let (f0, f1) = (vals[j], vals[j + 1]);
        if f0 == 0.0 {
            roots.push(mus[j]);
            continue;
        }
        if f0.signum() != f1.signum() && f1 != 0.0 {
            if j + 1 == n {
                return Err(Error::SearchCeilingHit { mu_max });
            }
            let (mut a, mut b, mut fa) = (mus[j], mus[j + 1], f0);
            while b - a > cfg.root_tol {
                let m = 0.5 * (a + b);
                let fm = e_imag(solver, c, m)?;
                if fm == 0.0 {
                    a = m;
                    b = m;
                    break;
                }
                if fm.signum() == fa.signum() {
                    a = m;
                    fa = fm;
                } else {
                    b = m;
                }
            }
            roots.push(0.5 * (a + b));
        }
    }
    if vals[n] == 0.0 {
        return Err(Error::SearchCeilingHit { mu_max });
    }
    Ok(roots)
}

/// Centered difference of `mu -> E(i mu)` at `lambda_k`.
pub fn simplicity_witness(solver: &JostSolver, c: &BoundaryCoefficients, lambda_k: f64) -> Result<f64> {
    let d = 1e-5 * lambda_k.max(1e-3);
    Ok((e_imag(solver, c, lambda_k + d)? - e_imag(solver, c, lambda_k - d)?) / (2.0 * d))
}

/// Winding number of `E` around the rectangle with sides at `+-lambda_max`
/// and heights `100 root_tol` and `mu_max`.
pub fn verify_zero_count(
    p: &DensityProfile,
    q: &PotentialSpec,
    c: &BoundaryCoefficients,
    cfg: &NumericsConfig,
) -> Result<i64> {
    let solver = JostSolver::new(p, q, cfg)?;
    let mu_max = cfg.mu_max.unwrap_or_else(|| default_mu_max(p, q, c));
    let lo = scan_floor(cfg);
    let l = cfg.lambda_max;
    let corners = [
        Complex64::new(-l, lo),
        Complex64::new(l, lo),
        Complex64::new(l, mu_max),
        Complex64::new(-l, mu_max),
    ];
    let eval = |z: Complex64| -> Result<Complex64> {
        let e = characteristic_at(&solver, c, z)?;
        if e.norm() <= cfg.root_tol {
            return Err(Error::ContourThroughZero { lambda: format!("{z}"), modulus: e.norm() });
        }
        Ok(e)
    };
    let mut total = 0.0;
    for k in 0..4 {
        let (z0, z1) = (corners[k], corners[(k + 1) % 4]);
        let n0 = ((z1 - z0).norm() * 4.0).ceil().max(16.0) as usize;
        let zs: Vec<Complex64> = (0..=n0).map(|j| z0 + (z1 - z0) * (j as f64 / n0 as f64)).collect();
        let es = zs.par_iter().map(|&z| eval(z)).collect::<Result<Vec<_>>>()?;
        for j in 0..n0 {
            total += phase_change(&eval, zs[j], zs[j + 1], es[j], es[j + 1], 0)?;
        }
    }
    let w = total / (2.0 * PI);
    let r = w.round();
    if (w - r).abs() > 0.1 {
        return Err(Error::WindingNotInteger(w));
    }
    Ok(r as i64)
}

fn phase_change(
    eval: &impl Fn(Complex64) -> Result<Complex64>,
    z0: Complex64,
    z1: Complex64,
    e0: Complex64,
    e1: Complex64,
    depth: usize,
) -> Result<f64> {
    let d = (e1 / e0).arg();
    if d.abs() < 0.5 || depth > 40 {
        return Ok(d);
    }
    let zm = 0.5 * (z0 + z1);
    let em = eval(zm)?;
    Ok(phase_change(eval, z0, zm, e0, em, depth + 1)? + phase_change(eval, zm, z1, em, e1, depth + 1)?)
}

/// `m_k` from the weighted norm of `e(x, i lambda_k)` and the boundary correction.
pub fn norming_constants(
    p: &DensityProfile,
    q: &PotentialSpec,
    c: &BoundaryCoefficients,
    bound_states: &[f64],
    cfg: &NumericsConfig,
) -> Result<Vec<f64>> {
    let solver = JostSolver::new(p, q, cfg)?;
    bound_states.iter().map(|&l| norming_one(&solver, p, c, l, cfg)).collect()
}

fn norming_one(solver: &JostSolver, p: &DensityProfile, c: &BoundaryCoefficients, l: f64, cfg: &NumericsConfig) -> Result<f64> {
    let (dense, scale) = solver.dense(Complex64::new(0.0, l))?;
    let inner = dense.weighted_square_integral(|x| p.sqrt_rho(x).powi(2)) * scale.norm_sqr();
    let tail = (-2.0 * l * solver.x_start()).exp() / (2.0 * l);
    let mut inv = inner + tail;
    if c.has_beta() {
        let bp = c.beta0 - c.beta1 * l - c.beta2 * l * l;
        let size = c.beta0.abs() + c.beta1.abs() * l + c.beta2.abs() * l * l;
        if bp.abs() <= cfg.root_tol * size.max(1.0) {
            return Err(Error::BoundaryPolynomialVanishes(l));
        }
        let (d1, d2, d3) = c.deltas();
        inv -= (d1 + 2.0 * d2 * l - d3 * l * l) / (2.0 * l * bp * bp);
    }
    if !(inv > 0.0) {
        return Err(Error::NonpositiveNorm { lambda_k: l, value: inv });
    }
    Ok(inv.powf(-0.5))
}

/// Bound states with normalizing numbers, simplicity witnesses and traces.
pub fn bound_states_detailed(
    p: &DensityProfile,
    q: &PotentialSpec,
    c: &BoundaryCoefficients,
    cfg: &NumericsConfig,
) -> Result<Vec<BoundState>> {
    let solver = JostSolver::new(p, q, cfg)?;
    let roots = find_with(&solver, p, q, c, cfg)?;
    roots
        .iter()
        .map(|&l| {
            let m_k = norming_one(&solver, p, c, l, cfg)?;
            let derivative = simplicity_witness(&solver, c, l)?;
            let s = solver.sample(Complex64::new(0.0, l))?;
            let e_trace = s.trace.iter().map(|&(x, e, _)| (x, e.re)).collect();
            Ok(BoundState { lambda_k: l, m_k, derivative, e_trace })
        })
        .collect()
}

/// Forward map together with `E` on the grid.
pub fn forward_with_characteristic(
    p: &DensityProfile,
    q: &PotentialSpec,
    c: &BoundaryCoefficients,
    cfg: &NumericsConfig,
) -> Result<(ScatteringData, Vec<CharacteristicValue>)> {
    validate_boundary(c)?;
    cfg.validate(p, q)?;
    let solver = JostSolver::new(p, q, cfg)?;
    let grid = lambda_grid(cfg.lambda_max, cfg.n_lambda);
    let chars = grid
        .par_iter()
        .map(|&l| {
            let lam = Complex64::new(l, 0.0);
            let (e, de) = solver.at_origin(lam)?;
            let j = JostSample { lambda: lam, e_at_zero: e, e_prime_at_zero: de, trace: Vec::new() };
            characteristic(c, &j, cfg.root_tol)
        })
        .collect::<Result<Vec<_>>>()?;
    let bound_states = find_with(&solver, p, q, c, cfg)?;
    let norming = bound_states
        .iter()
        .map(|&l| norming_one(&solver, p, c, l, cfg))
        .collect::<Result<Vec<_>>>()?;
    let s_values = chars.iter().map(|v| v.s.expect("real lambda")).collect();
    Ok((ScatteringData { lambda_grid: grid, s_values, bound_states, norming }, chars))
}

/// `{S(lambda), lambda_k, m_k}` for the given problem.
pub fn forward_scattering(
    p: &DensityProfile,
    q: &PotentialSpec,
    c: &BoundaryCoefficients,
    cfg: &NumericsConfig,
) -> Result<ScatteringData> {
    forward_with_characteristic(p, q, c, cfg).map(|r| r.0)
}
