//! Transition functions `F0s`, `F0`, `F_s`, `F` built from scattering data.
//!
//! `F0s(t) = (1/2pi) int (S0 - S) exp(i lambda t) d lambda`. Since `S0 - S`
//! decays only like `1/lambda`, the sampled band `|lambda| < lambda_max` is
//! completed by a model of the high-frequency part,
//!
//! ```text
//! S0 - S ~ sum_{n, j} c_{n,j} exp(-2 i l mu+(0)) Z^j / (l^n (1 + m tau Z)^(n+1)),   Z = exp(2 i l alpha a),
//! ```
//!
//! fitted by least squares on the outer part of the band. Expanded in
//! powers of `Z`, each term is `w exp(i l s) / l^n`, whose integral over
//! `|l| > lambda_max` is known in closed form through `Si`. The `n = 1` terms
//! carry the jumps of `F0s`.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use std::collections::BTreeMap;
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::model::{BoundaryCoefficients, DensityProfile, NumericsConfig, ScatteringData};
use crate::scattering::SZero;
use crate::special::sici;

/// Structured `(x, y)` grid shared by the transition table and the kernel
/// solves. The `y` nodes are `y0 + i h_y` with `y0 = mu+(0)`; `a` is node
/// `i_a`, so every reflection `2a - y` of a node is again a node. Below `a`
/// the x step moves `mu+(x)` by `m1` nodes, above `a` by `m2` nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelGrid {
    pub h_y: f64,
    pub y0: f64,
    pub i_a: usize,
    /// Index of the last y node.
    pub m_last: usize,
    pub x_nodes: Vec<f64>,
    /// Index of the y node `mu+(x)` for every x node.
    pub first: Vec<usize>,
    /// Number of x nodes strictly below `a`.
    pub n_inside: usize,
    pub dx_inside: f64,
    pub dx_outside: f64,
}

impl KernelGrid {
    pub fn new(p: &DensityProfile, h_x: f64, x_max: f64, y_max: f64) -> Result<Self> {
        let a = p.a();
        let alpha = p.alpha();
        let m1 = (alpha.round() as usize).max(1);
        let n1 = ((a / h_x).round() as usize).max(3);
        let dx_inside = a / n1 as f64;
        let h_y = alpha * dx_inside / m1 as f64;
        let i_a = n1 * m1;
        let y0 = a - i_a as f64 * h_y;
        let m2 = ((h_x / h_y).round() as usize).max(1);
        let dx_outside = m2 as f64 * h_y;
        let n2 = (((x_max - a) / dx_outside) - 1e-9).ceil().max(1.0) as usize;
        let mut x_nodes: Vec<f64> = (0..n1).map(|i| i as f64 * dx_inside).collect();
        let mut first: Vec<usize> = (0..n1).map(|i| i * m1).collect();
        for j in 0..=n2 {
            x_nodes.push(a + j as f64 * dx_outside);
            first.push(i_a + j * m2);
        }
        let m_last = (((y_max - y0) / h_y) - 1e-9).ceil() as usize;
        let need = (first[first.len() - 1] + 4).max(2 * i_a + 2);
        if m_last < need {
            return Err(Error::InvalidConfig(format!("y_max = {y_max} too close to x_max")));
        }
        Ok(Self { h_y, y0, i_a, m_last, x_nodes, first, n_inside: n1, dx_inside, dx_outside })
    }

    pub fn y(&self, i: usize) -> f64 {
        self.y0 + i as f64 * self.h_y
    }

    /// Abscissa of t-index `k`, `t = 2 y0 + k h_y`.
    pub fn t(&self, k: usize) -> f64 {
        2.0 * self.y0 + k as f64 * self.h_y
    }

    /// Table length covering every `y + mu+-(x)` that the solves touch.
    pub fn t_count(&self) -> usize {
        self.m_last + self.m_last.max(2 * self.i_a) + 1
    }
}

/// One expanded tail term `w exp(i l s) / l^n`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TailTerm {
    pub n: usize,
    pub s: f64,
    pub w: Complex64,
}

/// Fitted high-frequency model of `S0 - S`.
#[derive(Debug, Clone, PartialEq)]
pub struct TailModel {
    pub lambda_max: f64,
    pub terms: Vec<TailTerm>,
    /// Largest misfit on the fitting window relative to `max |S0 - S|` there.
    pub fit_residual: f64,
}

/// `int_{|l| > L} exp(i l u) / l^n dl` for `n = 1..=nmax`.
fn outer_integrals(lmax: f64, u: f64, nmax: usize) -> Vec<Complex64> {
    let i = Complex64::i();
    let mut out = Vec::with_capacity(nmax);
    let i1 = if u == 0.0 {
        Complex64::default()
    } else {
        let (si, _) = sici(lmax * u.abs());
        i * (2.0 * u.signum() * (0.5 * PI - si))
    };
    out.push(i1);
    let ep = (i * lmax * u).exp();
    let em = ep.conj();
    for k in 2..=nmax {
        let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
        let prev = out[k - 2];
        out.push(((ep + sign * em) * lmax.powi(1 - k as i32) + i * u * prev) / (k - 1) as f64);
    }
    out
}

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, j| acc * (n - j) as f64 / (j + 1) as f64)
}

impl TailModel {
    pub fn fit(sd: &ScatteringData, s0: &SZero, order: usize, window: f64) -> Result<Self> {
        let lmax = sd.lambda_max();
        let i = Complex64::i();
        let degenerate = s0.tau == 0.0;
        let mut basis: Vec<(usize, i32)> = Vec::new();
        for n in 1..=order {
            if degenerate {
                basis.push((n, 0));
            } else {
                for j in -1..=(n as i32) {
                    basis.push((n, j));
                }
            }
        }
        let rows: Vec<(f64, Complex64)> = sd
            .lambda_grid
            .iter()
            .zip(&sd.s_values)
            .filter(|(&l, _)| l > window * lmax)
            .map(|(&l, &s)| (l, s0.eval(l) - s))
            .collect();
        if basis.is_empty() || rows.len() < basis.len() {
            return Ok(Self { lambda_max: lmax, terms: Vec::new(), fit_residual: 0.0 });
        }
        // coefficient of term n is i^n r with real r (Hermitian symmetry)
        let col = |l: f64, n: usize, j: i32| -> Complex64 {
            let z = (i * l * s0.period).exp();
            let xb2 = (-2.0 * i * l * s0.mu0).exp();
            i.powi(n as i32) * xb2 * z.powi(j) / (l.powi(n as i32) * (1.0 + s0.mix * s0.tau * z).powi(n as i32 + 1))
        };
        let nr = rows.len();
        let nc = basis.len();
        let mut a = DMatrix::<f64>::zeros(2 * nr, nc);
        let mut b = DVector::<f64>::zeros(2 * nr);
        for (r, &(l, d)) in rows.iter().enumerate() {
            let w = l * l;
            for (cidx, &(n, j)) in basis.iter().enumerate() {
                let v = col(l, n, j) * w;
                a[(2 * r, cidx)] = v.re;
                a[(2 * r + 1, cidx)] = v.im;
            }
            b[2 * r] = d.re * w;
            b[2 * r + 1] = d.im * w;
        }
        let svd = a.svd(true, true);
        let coef = svd
            .solve(&b, 1e-13)
            .map_err(|e| Error::InvalidScatteringData(format!("tail fit failed: {e}")))?;
        let mut fit_residual: f64 = 0.0;
        let mut scale: f64 = 0.0;
        for &(l, d) in &rows {
            let m: Complex64 = basis.iter().zip(coef.iter()).map(|(&(n, j), &r)| col(l, n, j) * r).sum();
            fit_residual = fit_residual.max((m - d).norm());
            scale = scale.max(d.norm());
        }
        // expand 1/(1 + m tau Z)^(n+1) in powers of Z
        let mut acc: BTreeMap<(usize, i64), TailTerm> = BTreeMap::new();
        let ratio = -s0.mix * s0.tau;
        for (&(n, j), &r) in basis.iter().zip(coef.iter()) {
            let c = i.powi(n as i32) * r;
            for k in 0..400usize {
                let w = c * binomial(n + k, k) * ratio.powi(k as i32);
                if k > 0 && w.norm() < 1e-17 {
                    break;
                }
                let s = -2.0 * s0.mu0 + s0.period * (j as f64 + k as f64);
                let key = (n, (s * 1e9).round() as i64);
                acc.entry(key).and_modify(|t| t.w += w).or_insert(TailTerm { n, s, w });
                if ratio == 0.0 {
                    break;
                }
            }
        }
        Ok(Self {
            lambda_max: lmax,
            terms: acc.into_values().collect(),
            fit_residual: if scale > 0.0 { fit_residual / scale } else { 0.0 },
        })
    }

    fn max_order(&self) -> usize {
        self.terms.iter().map(|t| t.n).max().unwrap_or(0)
    }

    /// Contribution of `|l| > lambda_max` to `F0s(t)`.
    pub fn eval(&self, t: f64, snap: f64) -> f64 {
        let nmax = self.max_order();
        let mut total = 0.0;
        let mut cache: BTreeMap<i64, Vec<Complex64>> = BTreeMap::new();
        for term in &self.terms {
            let mut u = t + term.s;
            if u.abs() < snap {
                u = 0.0;
            }
            let key = (term.s * 1e9).round() as i64;
            let ints = cache.entry(key).or_insert_with(|| outer_integrals(self.lambda_max, u, nmax));
            total += (term.w * ints[term.n - 1]).re;
        }
        total / (2.0 * PI)
    }

    /// Jumps `(t, F0s(t+0) - F0s(t-0))` produced by the `1/l` terms.
    pub fn jumps(&self) -> Vec<(f64, f64)> {
        self.terms
            .iter()
            .filter(|t| t.n == 1)
            .map(|t| (-t.s, (Complex64::i() * t.w).re))
            .filter(|&(_, j)| j != 0.0)
            .collect()
    }
}

/// Tabulated `F0s` plus the exact discrete part.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionTable {
    pub t0: f64,
    pub dt: f64,
    /// `F0s` on the grid; at a jump node the mean of both one-sided limits.
    pub f0s_values: Vec<f64>,
    /// `(t, right limit - left limit)` at the grid nodes where `F0s` jumps.
    pub jumps: Vec<(f64, f64)>,
    /// `(lambda_k, m_k)`.
    pub bound: Vec<(f64, f64)>,
    pub tail: TailModel,
    /// Largest imaginary residue of the band sum bound.
    pub imag_residue: f64,
}

/// Band-limited part `(dl/2pi) sum (S0 - S) exp(i l t)` using Hermitian pairs.
fn band_sum(pos: &[(f64, Complex64)], dl: f64, t: f64) -> f64 {
    if pos.is_empty() {
        return 0.0;
    }
    let i = Complex64::i();
    let mut z = (i * pos[0].0 * t).exp();
    let r = (i * dl * t).exp();
    let mut acc = Complex64::default();
    for (k, &(_, d)) in pos.iter().enumerate() {
        if k % 64 == 0 {
            z = (i * pos[k].0 * t).exp();
        }
        acc += d * z;
        z *= r;
    }
    acc.re * dl / PI
}

/// `F0s` on `t = t0 + k dt`, `k = 0..n`.
pub fn f0s_transform_on(
    sd: &ScatteringData,
    p: &DensityProfile,
    c: &BoundaryCoefficients,
    cfg: &NumericsConfig,
    t0: f64,
    dt: f64,
    n: usize,
) -> Result<TransitionTable> {
    sd.validate()?;
    let s0 = SZero::new(p, c)?;
    let dl = sd.lambda_step();
    let nl = sd.lambda_grid.len();
    let imag_residue = (0..nl / 2)
        .map(|j| (sd.s_values[j].conj() - sd.s_values[nl - 1 - j]).norm())
        .sum::<f64>()
        * dl
        / (2.0 * PI);
    if imag_residue > cfg.solve_tol {
        return Err(Error::NonHermitianData(imag_residue));
    }
    let pos: Vec<(f64, Complex64)> = sd.lambda_grid[nl / 2..]
        .iter()
        .zip(&sd.s_values[nl / 2..])
        .map(|(&l, &s)| (l, s0.eval(l) - s))
        .collect();
    let tail = TailModel::fit(sd, &s0, cfg.tail_order, cfg.tail_window)?;
    let snap = 1e-9 * dt;
    let values: Vec<f64> = {
        use rayon::prelude::*;
        (0..n)
            .into_par_iter()
            .map(|k| {
                let t = t0 + k as f64 * dt;
                band_sum(&pos, dl, t) + tail.eval(t, snap)
            })
            .collect()
    };
    let t_end = t0 + (n as f64 - 1.0) * dt;
    let jumps = tail
        .jumps()
        .into_iter()
        .filter(|&(t, _)| t >= t0 - snap && t <= t_end + snap)
        .map(|(t, j)| {
            let k = ((t - t0) / dt).round();
            (t0 + k * dt, j, (t - t0 - k * dt).abs())
        })
        .filter(|&(_, _, off)| off < snap.max(1e-12))
        .map(|(t, j, _)| (t, j))
        .collect();
    Ok(TransitionTable {
        t0,
        dt,
        f0s_values: values,
        jumps,
        bound: sd.bound_states.iter().copied().zip(sd.norming.iter().copied()).collect(),
        tail,
        imag_residue,
    })
}

/// `F0s` tabulated on the default kernel grid, `t` in `[2 mu+(0), 2 y_max]`.
pub fn f0s_transform(
    sd: &ScatteringData,
    p: &DensityProfile,
    c: &BoundaryCoefficients,
    cfg: &NumericsConfig,
) -> Result<TransitionTable> {
    let y_max = cfg.resolved_y_max(p, &sd.bound_states);
    let g = KernelGrid::new(p, cfg.h_x, cfg.x_max, y_max)?;
    f0s_transform_on(sd, p, c, cfg, g.t(0), g.h_y, g.t_count())
}

impl TransitionTable {
    pub fn t_end(&self) -> f64 {
        self.t0 + (self.f0s_values.len() as f64 - 1.0) * self.dt
    }

    fn jump_at(&self, k: usize) -> f64 {
        let t = self.t0 + k as f64 * self.dt;
        self.jumps
            .iter()
            .filter(|(tj, _)| (tj - t).abs() < 1e-9 * self.dt)
            .map(|&(_, j)| j)
            .sum()
    }

    /// Node value with side `-1`, `0` (mean) or `+1` at a jump.
    pub fn node(&self, k: usize, side: i32) -> f64 {
        let v = self.f0s_values[k];
        if side == 0 {
            v
        } else {
            v + 0.5 * side as f64 * self.jump_at(k)
        }
    }

    /// `F0s(t)`, one-sided at jump nodes; linear between nodes.
    pub fn f0s_side(&self, t: f64, side: i32) -> Result<f64> {
        let te = self.t_end();
        let tol = 1e-9 * self.dt;
        if t < self.t0 - tol || t > te + tol {
            return Err(Error::OutOfRange { t, lo: self.t0, hi: te });
        }
        let r = (t - self.t0) / self.dt;
        let k = r.round();
        if (r - k).abs() * self.dt < tol {
            return Ok(self.node(k as usize, side));
        }
        let k0 = r.floor() as usize;
        let f = r - k0 as f64;
        Ok(self.node(k0, 1) * (1.0 - f) + self.node(k0 + 1, -1) * f)
    }

    pub fn discrete(&self, t: f64) -> f64 {
        self.bound.iter().map(|&(l, m)| m * m * (-l * t).exp()).sum()
    }

    /// `F0(t) = F0s(t) + sum m_k^2 exp(-lambda_k t)`.
    pub fn f0_eval(&self, t: f64) -> Result<f64> {
        Ok(self.f0s_side(t, 0)? + self.discrete(t))
    }
}

/// `F0(t)`.
pub fn f0_eval(tt: &TransitionTable, t: f64) -> Result<f64> {
    tt.f0_eval(t)
}

/// Continuous part of `F`: the two-term combination of `F0s`.
pub fn fs_eval(tt: &TransitionTable, p: &DensityProfile, x: f64, y: f64) -> Result<f64> {
    let (mp, mm) = p.mu_pm(x)?;
    let (wa, wb) = p.weights(x);
    let mut v = wa * tt.f0s_side(y + mp, 0)?;
    if wb != 0.0 {
        v += wb * tt.f0s_side(y + mm, 0)?;
    }
    Ok(v)
}

/// `F(x, y) = F_s(x, y) + sum m_k^2 e0(x, i lambda_k) exp(-lambda_k y)`.
pub fn f_eval(tt: &TransitionTable, p: &DensityProfile, x: f64, y: f64) -> Result<f64> {
    let (mp, mm) = p.mu_pm(x)?;
    let (wa, wb) = p.weights(x);
    let disc: f64 = tt
        .bound
        .iter()
        .map(|&(l, m)| m * m * (wa * (-l * mp).exp() + wb * (-l * mm).exp()) * (-l * y).exp())
        .sum();
    Ok(fs_eval(tt, p, x, y)? + disc)
}

/// `sup |F(x, y)|` over the grid nodes with `y > mu+(x)`, and `sup |F0(t)|` over the table.
///
/// With `q = 0` the kernel vanishes, so the main equation reduces to `F = 0` there.
pub fn f_cancellation(tt: &TransitionTable, p: &DensityProfile, g: &KernelGrid) -> Result<(f64, f64)> {
    let mut f_sup: f64 = 0.0;
    for (&x, &first) in g.x_nodes.iter().zip(&g.first) {
        for i in first + 1..=g.m_last {
            f_sup = f_sup.max(f_eval(tt, p, x, g.y(i))?.abs());
        }
    }
    let f0_sup = (0..tt.f0s_values.len())
        .map(|k| (tt.node(k, 0) + tt.discrete(tt.t0 + k as f64 * tt.dt)).abs())
        .fold(0.0, f64::max);
    Ok((f_sup, f0_sup))
}
