//! Integration of `u'' = (q(x) - lambda^2 rho(x)) u` for complex `lambda`.
//!
//! The line is cut into pieces on which `rho` is constant and `q` is linear.
//! Pieces with `q = 0` are crossed with the exact trigonometric propagator,
//! the others with an adaptive Dormand-Prince 5(4) pair. Every piece end is
//! a mandatory step end, so the jump of `rho` at `a` and the kinks of `q`
//! never fall inside a step.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::model::{DensityProfile, PotentialSpec};

#[derive(Debug, Clone, Copy)]
pub(crate) struct Piece {
    pub x0: f64,
    pub x1: f64,
    pub rho: f64,
    pub q0: f64,
    pub q1: f64,
}

impl Piece {
    fn is_free(&self) -> bool {
        self.q0 == 0.0 && self.q1 == 0.0
    }

    fn q(&self, x: f64) -> f64 {
        self.q0 + (self.q1 - self.q0) * (x - self.x0) / (self.x1 - self.x0)
    }

    fn dq(&self) -> f64 {
        (self.q1 - self.q0) / (self.x1 - self.x0)
    }
}

/// Piecewise description of the coefficients on `[0, end]`.
#[derive(Debug, Clone)]
pub(crate) struct Medium {
    pub pieces: Vec<Piece>,
}

impl Medium {
    /// Breakpoints are 0, `a`, the potential nodes, `extra` and `end`.
    pub fn new(p: &DensityProfile, q: &PotentialSpec, end: f64, extra: &[f64]) -> Self {
        let mut b = vec![0.0, end];
        if p.a() < end {
            b.push(p.a());
        }
        b.extend(q.breakpoints().into_iter().filter(|&x| x > 0.0 && x < end));
        b.extend(extra.iter().copied().filter(|&x| x > 0.0 && x < end));
        b.sort_by(|x, y| x.partial_cmp(y).unwrap());
        b.dedup_by(|x, y| (*x - *y).abs() <= 1e-13 * (1.0 + y.abs()));
        let xq = q.support_bound();
        let pieces = b
            .windows(2)
            .map(|w| {
                let (x0, x1) = (w[0], w[1]);
                let q0 = if x0 >= xq { 0.0 } else { q.eval(x0) };
                let q1 = if x0 >= xq { 0.0 } else { q.eval(x1) };
                let s = if x1 <= p.a() { p.alpha() } else { 1.0 };
                Piece { x0, x1, rho: s * s, q0, q1 }
            })
            .collect();
        Self { pieces }
    }

    pub fn end(&self) -> f64 {
        self.pieces.last().map_or(0.0, |p| p.x1)
    }
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct OdeOptions {
    pub tol: f64,
    pub max_steps: usize,
}

/// One interval of a dense solution.
#[derive(Debug, Clone, Copy)]
pub(crate) enum DensePiece {
    Free { x0: f64, x1: f64, u0: Complex64, v0: Complex64, k: Complex64 },
    Hermite { x0: f64, x1: f64, u: [Complex64; 3], v: [Complex64; 3], u1: [Complex64; 3], v1: [Complex64; 3] },
}

/// Continuous solution over the integrated range.
#[derive(Debug, Clone, Default)]
pub struct DenseSolution {
    pieces: Vec<DensePiece>,
}

impl DenseSolution {
    fn lo_hi(p: &DensePiece) -> (f64, f64) {
        let (a, b) = match *p {
            DensePiece::Free { x0, x1, .. } => (x0, x1),
            DensePiece::Hermite { x0, x1, .. } => (x0, x1),
        };
        (a.min(b), a.max(b))
    }

    pub fn range(&self) -> (f64, f64) {
        self.pieces.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| {
            let (a, b) = Self::lo_hi(p);
            (lo.min(a), hi.max(b))
        })
    }

    /// `(u(x), u'(x))`; `None` outside the integrated range.
    pub fn eval(&self, x: f64) -> Option<(Complex64, Complex64)> {
        let p = self.pieces.iter().find(|p| {
            let (a, b) = Self::lo_hi(p);
            x >= a && x <= b
        })?;
        Some(eval_piece(p, x))
    }

    /// `int w(x) |u(x)|^2 dx` over the integrated range.
    pub fn weighted_square_integral(&self, w: impl Fn(f64) -> f64) -> f64 {
        let mut total = 0.0;
        for p in &self.pieces {
            let (a, b) = Self::lo_hi(p);
            let parts = match *p {
                DensePiece::Free { k, .. } => ((k.norm() * (b - a) / 0.25).ceil() as usize).max(1),
                DensePiece::Hermite { .. } => 1,
            };
            let h = (b - a) / parts as f64;
            for j in 0..parts {
                let lo = a + j as f64 * h;
                let mid = lo + 0.5 * h;
                let wm = w(mid);
                for (t, g) in GAUSS5 {
                    let x = mid + 0.5 * h * t;
                    let (u, _) = eval_piece(p, x);
                    total += 0.5 * h * g * wm * u.norm_sqr();
                }
            }
        }
        total
    }
}

const GAUSS5: [(f64, f64); 5] = [
    (0.0, 0.568_888_888_888_888_9),
    (-0.538_469_310_105_683_1, 0.478_628_670_499_366_5),
    (0.538_469_310_105_683_1, 0.478_628_670_499_366_5),
    (-0.906_179_845_938_664, 0.236_926_885_056_189_1),
    (0.906_179_845_938_664, 0.236_926_885_056_189_1),
];

fn free_step(u: Complex64, v: Complex64, k: Complex64, d: f64) -> (Complex64, Complex64) {
    let kd = k * d;
    let (c, s) = (kd.cos(), kd.sin());
    // sin(kd)/k, continuous at k = 0
    let sk = if kd.norm() < 1e-8 { Complex64::from(d) * (1.0 - kd * kd / 6.0) } else { s / k };
    (u * c + v * sk, -u * k * s + v * c)
}

fn eval_piece(p: &DensePiece, x: f64) -> (Complex64, Complex64) {
    match *p {
        DensePiece::Free { x0, u0, v0, k, .. } => free_step(u0, v0, k, x - x0),
        DensePiece::Hermite { x0, x1, u, v, u1, v1 } => {
            let h = x1 - x0;
            let s = (x - x0) / h;
            (quintic(u, u1, h, s), quintic(v, v1, h, s))
        }
    }
}

/// Quintic Hermite interpolant from value, first and second derivative at both ends.
fn quintic(f0: [Complex64; 3], f1: [Complex64; 3], h: f64, s: f64) -> Complex64 {
    let s2 = s * s;
    let s3 = s2 * s;
    let s4 = s3 * s;
    let s5 = s4 * s;
    let h0 = 1.0 - 10.0 * s3 + 15.0 * s4 - 6.0 * s5;
    let h1 = s - 6.0 * s3 + 8.0 * s4 - 3.0 * s5;
    let h2 = 0.5 * (s2 - 3.0 * s3 + 3.0 * s4 - s5);
    let g0 = 10.0 * s3 - 15.0 * s4 + 6.0 * s5;
    let g1 = -4.0 * s3 + 7.0 * s4 - 3.0 * s5;
    let g2 = 0.5 * (s3 - 2.0 * s4 + s5);
    f0[0] * h0 + f0[1] * (h * h1) + f0[2] * (h * h * h2) + f1[0] * g0 + f1[1] * (h * g1) + f1[2] * (h * h * g2)
}

// Dormand-Prince 5(4)
const C: [f64; 7] = [0.0, 0.2, 0.3, 0.8, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [0.2, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const E: [f64; 7] = [
    35.0 / 384.0 - 5179.0 / 57600.0,
    0.0,
    500.0 / 1113.0 - 7571.0 / 16695.0,
    125.0 / 192.0 - 393.0 / 640.0,
    -2187.0 / 6784.0 + 92097.0 / 339200.0,
    11.0 / 84.0 - 187.0 / 2100.0,
    -1.0 / 40.0,
];

/// Output of a sweep: the end state, states at every piece end, and
/// optionally the dense record.
pub(crate) struct Sweep {
    pub u: Complex64,
    pub v: Complex64,
    pub nodes: Vec<(f64, Complex64, Complex64)>,
    pub dense: Option<DenseSolution>,
}

/// Integrates across the whole medium, forward (`0 -> end`) or backward.
pub(crate) fn sweep(
    medium: &Medium,
    lambda: Complex64,
    u: Complex64,
    v: Complex64,
    backward: bool,
    opts: &OdeOptions,
    keep_dense: bool,
) -> Result<Sweep> {
    let l2 = lambda * lambda;
    let (mut u, mut v) = (u, v);
    let mut nodes = Vec::with_capacity(medium.pieces.len() + 1);
    let mut dense = if keep_dense { Some(DenseSolution::default()) } else { None };
    let start = if backward { medium.end() } else { 0.0 };
    nodes.push((start, u, v));
    let mut h_carry: Option<f64> = None;
    let order: Box<dyn Iterator<Item = &Piece>> =
        if backward { Box::new(medium.pieces.iter().rev()) } else { Box::new(medium.pieces.iter()) };
    for piece in order {
        let (xa, xb) = if backward { (piece.x1, piece.x0) } else { (piece.x0, piece.x1) };
        let k = (l2 * piece.rho).sqrt();
        if piece.is_free() {
            if let Some(d) = dense.as_mut() {
                d.pieces.push(DensePiece::Free { x0: xa, x1: xb, u0: u, v0: v, k });
            }
            (u, v) = free_step(u, v, k, xb - xa);
        } else {
            (u, v) = adaptive(piece, l2, xa, xb, u, v, opts, &mut h_carry, dense.as_mut(), lambda)?;
        }
        nodes.push((xb, u, v));
    }
    Ok(Sweep { u, v, nodes, dense })
}

#[allow(clippy::too_many_arguments)]
fn adaptive(
    piece: &Piece,
    l2: Complex64,
    xa: f64,
    xb: f64,
    mut u: Complex64,
    mut v: Complex64,
    opts: &OdeOptions,
    h_carry: &mut Option<f64>,
    mut dense: Option<&mut DenseSolution>,
    lambda: Complex64,
) -> Result<(Complex64, Complex64)> {
    let span = xb - xa;
    let dir = span.signum();
    let kappa = (l2 * piece.rho).norm().sqrt().max(1.0);
    let g = |x: f64| piece.q(x) - l2 * piece.rho;
    let dg = piece.dq();
    let mut x = xa;
    let mut h = h_carry.unwrap_or(0.1 / kappa).min(span.abs()) * dir;
    let mut steps = 0usize;
    let mut ku = [Complex64::default(); 7];
    let mut kv = [Complex64::default(); 7];
    while (xb - x) * dir > 0.0 {
        steps += 1;
        if steps > opts.max_steps {
            return Err(Error::StepRejected { x, lambda: format!("{lambda}") });
        }
        let last = (xb - x - h) * dir <= 1e-12 * span.abs();
        if last {
            h = xb - x;
        }
        ku[0] = v;
        kv[0] = g(x) * u;
        for s in 1..7 {
            let mut uu = u;
            let mut vv = v;
            for j in 0..s {
                let a = A[s][j];
                if a != 0.0 {
                    uu += ku[j] * (h * a);
                    vv += kv[j] * (h * a);
                }
            }
            ku[s] = vv;
            kv[s] = g(x + C[s] * h) * uu;
        }
        // 5th-order solution is the 7th stage argument (FSAL)
        let mut un = u;
        let mut vn = v;
        let mut eu = Complex64::default();
        let mut ev = Complex64::default();
        for j in 0..7 {
            if j < 6 {
                un += ku[j] * (h * A[6][j]);
                vn += kv[j] * (h * A[6][j]);
            }
            eu += ku[j] * (h * E[j]);
            ev += kv[j] * (h * E[j]);
        }
        let scale = (kappa * u.norm()).max(v.norm()).max(kappa * un.norm()).max(vn.norm()).max(1e-300);
        let err = (kappa * eu.norm()).max(ev.norm()) / (opts.tol * scale);
        if err <= 1.0 {
            let x_new = if last { xb } else { x + h };
            if let Some(d) = dense.as_deref_mut() {
                let g0 = g(x);
                let g1 = g(x_new);
                d.pieces.push(DensePiece::Hermite {
                    x0: x,
                    x1: x_new,
                    u: [u, v, g0 * u],
                    v: [v, g0 * u, dg * u + g0 * v],
                    u1: [un, vn, g1 * un],
                    v1: [vn, g1 * un, dg * un + g1 * vn],
                });
            }
            x = x_new;
            u = un;
            v = vn;
            let fac = if err > 0.0 { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) } else { 5.0 };
            if !last {
                h *= fac;
                *h_carry = Some(h.abs());
            } else {
                *h_carry = Some((h * fac).abs().max(h_carry.unwrap_or(0.0)));
            }
        } else {
            h *= (0.9 * err.powf(-0.2)).clamp(0.1, 0.9);
            if h.abs() < 1e-14 * span.abs().max(1.0) {
                return Err(Error::StepRejected { x, lambda: format!("{lambda}") });
            }
        }
    }
    Ok((u, v))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn opts() -> OdeOptions {
        OdeOptions { tol: 1e-11, max_steps: 1_000_000 }
    }

    #[test]
    fn quintic_reproduces_polynomial() {
        // f = 1 + 2x - x^3 + x^5 on [0.3, 0.8]
        let f = |x: f64| 1.0 + 2.0 * x - x.powi(3) + x.powi(5);
        let d1 = |x: f64| 2.0 - 3.0 * x * x + 5.0 * x.powi(4);
        let d2 = |x: f64| -6.0 * x + 20.0 * x.powi(3);
        let c = |v: f64| Complex64::from(v);
        let (a, b) = (0.3, 0.8);
        for s in [0.0, 0.2, 0.5, 0.9, 1.0] {
            let x = a + s * (b - a);
            let y = quintic([c(f(a)), c(d1(a)), c(d2(a))], [c(f(b)), c(d1(b)), c(d2(b))], b - a, s);
            assert!((y.re - f(x)).abs() < 1e-13);
        }
    }

    #[test]
    fn linear_potential_matches_fine_rk4() {
        let p = DensityProfile::new(2.0, 1.0).unwrap();
        let q = PotentialSpec::new(vec![0.0, 0.5, 1.5, 2.0], vec![0.0, 1.0, -2.0, 0.0], 2.0).unwrap();
        let m = Medium::new(&p, &q, 3.0, &[]);
        let lam = Complex64::new(3.0, 0.0);
        let s = sweep(&m, lam, Complex64::new(1.0, 0.0), Complex64::new(0.0, 3.0), true, &opts(), false).unwrap();
        // oracle: classical RK4 with tiny fixed steps
        let n = 300_000;
        let h = -3.0 / n as f64;
        let (mut u, mut v) = (Complex64::new(1.0, 0.0), Complex64::new(0.0, 3.0));
        for i in 0..n {
            let x = 3.0 + i as f64 * h;
            let rho = if x + 0.5 * h < 1.0 { 4.0 } else { 1.0 };
            let f = |x: f64, u: Complex64, v: Complex64| (v, (q.eval(x) - lam * lam * rho) * u);
            let (a1, b1) = f(x, u, v);
            let (a2, b2) = f(x + 0.5 * h, u + a1 * (0.5 * h), v + b1 * (0.5 * h));
            let (a3, b3) = f(x + 0.5 * h, u + a2 * (0.5 * h), v + b2 * (0.5 * h));
            let (a4, b4) = f(x + h, u + a3 * h, v + b3 * h);
            u += (a1 + a2 * 2.0 + a3 * 2.0 + a4) * (h / 6.0);
            v += (b1 + b2 * 2.0 + b3 * 2.0 + b4) * (h / 6.0);
        }
        assert!((s.u - u).norm() < 1e-8, "{} vs {}", s.u, u);
        assert!((s.v - v).norm() < 1e-7);
    }

    #[test]
    fn dense_output_agrees_with_nodes() {
        let p = DensityProfile::new(2.0, 1.0).unwrap();
        let q = PotentialSpec::new(vec![0.0, 2.0], vec![1.0, 1.0], 2.0).unwrap();
        let extra = [0.37, 1.61];
        let m = Medium::new(&p, &q, 2.5, &extra);
        let lam = Complex64::new(2.0, 0.0);
        let s = sweep(&m, lam, Complex64::new(1.0, 0.0), Complex64::new(0.0, 2.0), true, &opts(), true).unwrap();
        let d = s.dense.unwrap();
        for &(x, u, v) in &s.nodes {
            let (du, dv) = d.eval(x).unwrap();
            assert!((du - u).norm() < 1e-12 && (dv - v).norm() < 1e-12);
        }
        assert!(s.nodes.iter().any(|n| n.0 == 0.37));
    }
}
