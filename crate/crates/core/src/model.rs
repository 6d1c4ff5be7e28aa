//! Domain types: the two-valued density, the boundary coefficients, sampled
//! potentials, numerical settings and scattering data.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Delta, Error, Result};

/// Density equal to `alpha^2` on `[0, a)` and to 1 beyond.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DensityProfile {
    alpha: f64,
    a: f64,
}

impl DensityProfile {
    /// Admissible profile: `alpha > 0`, `alpha != 1`, `a > 0`.
    pub fn new(alpha: f64, a: f64) -> Result<Self> {
        Self::with_mode(alpha, a, false)
    }

    /// Profile with `alpha = 1`, used only to validate against the classical
    /// half-line problem.
    pub fn degenerate(a: f64) -> Result<Self> {
        Self::with_mode(1.0, a, true)
    }

    pub fn with_mode(alpha: f64, a: f64, allow_degenerate: bool) -> Result<Self> {
        if !(alpha.is_finite() && alpha > 0.0) {
            return Err(Error::InvalidDensity(format!("alpha = {alpha} must be positive")));
        }
        if !(a.is_finite() && a > 0.0) {
            return Err(Error::InvalidDensity(format!("a = {a} must be positive")));
        }
        if alpha == 1.0 && !allow_degenerate {
            return Err(Error::DegenerateDensity);
        }
        Ok(Self { alpha, a })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn is_degenerate(&self) -> bool {
        self.alpha == 1.0
    }

    /// Interface reflection coefficient `(alpha - 1) / (alpha + 1)`.
    pub fn tau(&self) -> f64 {
        (self.alpha - 1.0) / (self.alpha + 1.0)
    }

    /// `rho(x)`; at `x = a` the right limit 1 is returned.
    pub fn rho_at(&self, x: f64) -> Result<f64> {
        check_abscissa(x)?;
        Ok(self.sqrt_rho(x).powi(2))
    }

    /// Travel-time coordinates `(mu_plus, mu_minus)`.
    pub fn mu_pm(&self, x: f64) -> Result<(f64, f64)> {
        check_abscissa(x)?;
        Ok(self.mu_pm_unchecked(x))
    }

    pub(crate) fn sqrt_rho(&self, x: f64) -> f64 {
        if x < self.a {
            self.alpha
        } else {
            1.0
        }
    }

    pub(crate) fn mu_pm_unchecked(&self, x: f64) -> (f64, f64) {
        if x < self.a {
            let mp = self.alpha * x + self.a * (1.0 - self.alpha);
            (mp, 2.0 * self.a - mp)
        } else {
            (x, 2.0 * self.a - x)
        }
    }

    /// Weights `(1/2)(1 + 1/sqrt(rho))` and `(1/2)(1 - 1/sqrt(rho))` of the
    /// two exponentials in the free Jost solution.
    pub fn weights(&self, x: f64) -> (f64, f64) {
        let s = self.sqrt_rho(x);
        (0.5 * (1.0 + 1.0 / s), 0.5 * (1.0 - 1.0 / s))
    }
}

fn check_abscissa(x: f64) -> Result<()> {
    if x < 0.0 || x.is_nan() {
        Err(Error::NegativeAbscissa(x))
    } else {
        Ok(())
    }
}

/// Coefficients of the boundary condition
/// `(a0 + i a1 l + a2 l^2) y(0) + (b0 + i b1 l + b2 l^2) y'(0) = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundaryCoefficients {
    pub alpha0: f64,
    pub alpha1: f64,
    pub alpha2: f64,
    pub beta0: f64,
    pub beta1: f64,
    pub beta2: f64,
}

impl BoundaryCoefficients {
    /// From `[alpha0, alpha1, alpha2, beta0, beta1, beta2]`.
    pub fn from_array(c: [f64; 6]) -> Self {
        Self {
            alpha0: c[0],
            alpha1: c[1],
            alpha2: c[2],
            beta0: c[3],
            beta1: c[4],
            beta2: c[5],
        }
    }

    pub fn to_array(&self) -> [f64; 6] {
        [self.alpha0, self.alpha1, self.alpha2, self.beta0, self.beta1, self.beta2]
    }

    pub fn dirichlet() -> Self {
        Self::from_array([1.0, 0.0, 0.0, 0.0, 0.0, 0.0])
    }

    pub fn deltas(&self) -> (f64, f64, f64) {
        (
            self.alpha0 * self.beta1 - self.alpha1 * self.beta0,
            self.alpha0 * self.beta2 - self.alpha2 * self.beta0,
            self.alpha1 * self.beta2 - self.alpha2 * self.beta1,
        )
    }

    pub fn scaled(&self, c: f64) -> Self {
        let v = self.to_array().map(|x| x * c);
        Self::from_array(v)
    }

    /// `alpha0 + i alpha1 l + alpha2 l^2`
    pub fn alpha_poly(&self, l: Complex64) -> Complex64 {
        self.alpha0 + Complex64::i() * self.alpha1 * l + self.alpha2 * l * l
    }

    /// `beta0 + i beta1 l + beta2 l^2`
    pub fn beta_poly(&self, l: Complex64) -> Complex64 {
        self.beta0 + Complex64::i() * self.beta1 * l + self.beta2 * l * l
    }

    pub fn has_beta(&self) -> bool {
        self.beta0 != 0.0 || self.beta1 != 0.0 || self.beta2 != 0.0
    }
}

/// Checks the sign conditions and returns `(delta1, delta2, delta3)`.
pub fn validate_boundary(c: &BoundaryCoefficients) -> Result<(f64, f64, f64)> {
    let v = c.to_array();
    if v.iter().any(|x| !x.is_finite()) {
        return Err(Error::InvalidConfig("boundary coefficients must be finite".into()));
    }
    if v.iter().all(|&x| x == 0.0) {
        return Err(Error::AllZeroCoefficients);
    }
    let (d1, d2, d3) = c.deltas();
    if d1 > 0.0 {
        return Err(Error::SignConditionViolated { which: Delta::Delta1, value: d1 });
    }
    if d2 > 0.0 {
        return Err(Error::SignConditionViolated { which: Delta::Delta2, value: d2 });
    }
    if d3 < 0.0 {
        return Err(Error::SignConditionViolated { which: Delta::Delta3, value: d3 });
    }
    Ok((d1, d2, d3))
}

/// Potential sampled on a grid, linearly interpolated, zero beyond `support_bound`.
#[derive(Debug, Clone, PartialEq)]
pub struct PotentialSpec {
    grid: Vec<f64>,
    values: Vec<f64>,
    support_bound: f64,
}

impl PotentialSpec {
    pub fn new(grid: Vec<f64>, values: Vec<f64>, support_bound: f64) -> Result<Self> {
        if grid.is_empty() || grid.len() != values.len() {
            return Err(Error::InvalidPotential(format!(
                "grid has {} nodes but {} values",
                grid.len(),
                values.len()
            )));
        }
        if grid[0] != 0.0 {
            return Err(Error::InvalidPotential("grid must start at 0".into()));
        }
        if grid.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidPotential("grid must be strictly increasing".into()));
        }
        if grid.iter().chain(values.iter()).any(|v| !v.is_finite()) {
            return Err(Error::InvalidPotential("non-finite sample".into()));
        }
        if !(support_bound.is_finite() && support_bound >= 0.0) {
            return Err(Error::InvalidPotential("support_bound must be finite and >= 0".into()));
        }
        if let Some(i) = grid.iter().zip(&values).position(|(&x, &v)| x > support_bound && v != 0.0) {
            return Err(Error::InvalidPotential(format!(
                "nonzero sample at x = {} beyond support_bound {}",
                grid[i], support_bound
            )));
        }
        Ok(Self { grid, values, support_bound })
    }

    /// `q = 0`.
    pub fn zero() -> Self {
        Self { grid: vec![0.0], values: vec![0.0], support_bound: 0.0 }
    }

    /// Samples `f` on `n + 1` uniform nodes of `[0, support_bound]`.
    pub fn from_fn(support_bound: f64, n: usize, f: impl Fn(f64) -> f64) -> Result<Self> {
        let n = n.max(1);
        let grid: Vec<f64> = (0..=n).map(|i| support_bound * i as f64 / n as f64).collect();
        let values = grid.iter().map(|&x| f(x)).collect();
        Self::new(grid, values, support_bound)
    }

    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn support_bound(&self) -> f64 {
        self.support_bound
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|&v| v == 0.0)
    }

    /// Linear interpolation; zero past the last node and past `support_bound`.
    pub fn eval(&self, x: f64) -> f64 {
        if x > self.support_bound || x < 0.0 {
            return 0.0;
        }
        let g = &self.grid;
        let n = g.len();
        if x > g[n - 1] {
            return 0.0;
        }
        if n == 1 {
            return self.values[0];
        }
        let j = g.partition_point(|&t| t <= x).clamp(1, n - 1);
        let (x0, x1) = (g[j - 1], g[j]);
        let (v0, v1) = (self.values[j - 1], self.values[j]);
        v0 + (v1 - v0) * (x - x0) / (x1 - x0)
    }

    /// `sum (1 + x_i) |q(x_i)| dx_i`, the discrete analogue of the integrability condition.
    pub fn weighted_norm(&self) -> f64 {
        let g = &self.grid;
        (0..g.len().saturating_sub(1))
            .map(|i| {
                let dx = g[i + 1] - g[i];
                0.5 * dx
                    * ((1.0 + g[i]) * self.values[i].abs() + (1.0 + g[i + 1]) * self.values[i + 1].abs())
            })
            .sum()
    }

    /// Abscissae where the interpolant may have a kink, clipped to the support.
    pub(crate) fn breakpoints(&self) -> Vec<f64> {
        let mut b: Vec<f64> = self.grid.iter().copied().filter(|&x| x <= self.support_bound).collect();
        if self.support_bound > 0.0 && self.support_bound <= self.grid[self.grid.len() - 1] {
            b.push(self.support_bound);
        }
        b
    }

    /// Largest abscissa at which `q` can be nonzero.
    pub(crate) fn effective_support(&self) -> f64 {
        let last = self.grid[self.grid.len() - 1];
        if self.is_zero() {
            0.0
        } else {
            self.support_bound.min(last)
        }
    }
}

/// Grid sizes, truncations and tolerances.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NumericsConfig {
    pub x_max: f64,
    pub h_x: f64,
    pub lambda_max: f64,
    pub n_lambda: usize,
    /// Marchenko truncation; `None` selects the default after bound states are known.
    pub y_max: Option<f64>,
    pub root_tol: f64,
    pub quad_tol: f64,
    pub solve_tol: f64,
    /// Bound-state search ceiling; `None` selects the default.
    pub mu_max: Option<f64>,
    /// Highest inverse power of lambda in the fitted high-frequency model of `S0 - S`.
    pub tail_order: usize,
    /// The tail model is fitted on `|lambda| > tail_window * lambda_max`.
    pub tail_window: f64,
}

impl NumericsConfig {
    pub fn default_for(p: &DensityProfile, q: &PotentialSpec) -> Self {
        let a = p.a();
        Self {
            x_max: a.max(q.support_bound()) + a,
            h_x: a / 100.0,
            lambda_max: 40.0 / a,
            n_lambda: 4096,
            y_max: None,
            root_tol: 1e-10,
            quad_tol: 1e-8,
            solve_tol: 1e-8,
            mu_max: None,
            tail_order: 5,
            tail_window: 0.25,
        }
    }

    pub fn validate(&self, p: &DensityProfile, q: &PotentialSpec) -> Result<()> {
        if !(self.x_max > p.a() && self.x_max >= q.effective_support()) {
            return Err(Error::TruncationTooSmall {
                x_max: self.x_max,
                bound: p.a().max(q.effective_support()),
            });
        }
        let positive = [
            ("h_x", self.h_x),
            ("lambda_max", self.lambda_max),
            ("root_tol", self.root_tol),
            ("quad_tol", self.quad_tol),
            ("solve_tol", self.solve_tol),
            ("tail_window", self.tail_window),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidConfig(format!("{name} = {v} must be positive")));
            }
        }
        if self.n_lambda < 2 || !self.n_lambda.is_multiple_of(2) {
            return Err(Error::InvalidConfig(format!(
                "n_lambda = {} must be even and >= 2",
                self.n_lambda
            )));
        }
        if self.h_x > p.a() / 3.0 {
            return Err(Error::InvalidConfig(format!("h_x = {} exceeds a/3", self.h_x)));
        }
        if let Some(y) = self.y_max {
            if !(y > self.x_max) {
                return Err(Error::InvalidConfig(format!("y_max = {y} must exceed x_max")));
            }
        }
        if let Some(m) = self.mu_max {
            if !(m > self.root_tol) {
                return Err(Error::InvalidConfig(format!("mu_max = {m} too small")));
            }
        }
        if self.tail_window >= 1.0 {
            return Err(Error::InvalidConfig("tail_window must be below 1".into()));
        }
        Ok(())
    }

    /// Default Marchenko truncation given the bound states.
    pub fn resolved_y_max(&self, p: &DensityProfile, bound_states: &[f64]) -> f64 {
        if let Some(y) = self.y_max {
            return y;
        }
        match bound_states.iter().copied().reduce(f64::min) {
            Some(l) => self.x_max + 5.0 / l.min(1.0 / p.a()),
            None => self.x_max + 10.0 * p.a(),
        }
    }

    /// Same settings with `h_x` halved and `n_lambda` doubled.
    pub fn refined(&self) -> Self {
        Self { h_x: self.h_x / 2.0, n_lambda: self.n_lambda * 2, ..self.clone() }
    }
}

/// Uniform midpoint grid on `[-lambda_max, lambda_max]`: symmetric, without 0.
pub fn lambda_grid(lambda_max: f64, n: usize) -> Vec<f64> {
    let d = 2.0 * lambda_max / n as f64;
    (0..n).map(|j| (j as f64 - n as f64 / 2.0 + 0.5) * d).collect()
}

/// Sampled `S(lambda)` with the discrete spectrum.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScatteringData {
    pub lambda_grid: Vec<f64>,
    pub s_values: Vec<Complex64>,
    pub bound_states: Vec<f64>,
    pub norming: Vec<f64>,
}

impl ScatteringData {
    /// Structural checks: symmetric uniform grid, matching lengths, ordered
    /// positive bound states and positive normalizing numbers.
    pub fn validate(&self) -> Result<()> {
        let n = self.lambda_grid.len();
        if n < 2 || !n.is_multiple_of(2) || self.s_values.len() != n {
            return Err(Error::InvalidScatteringData(format!(
                "grid of {} points with {} samples",
                n,
                self.s_values.len()
            )));
        }
        let d = self.lambda_grid[1] - self.lambda_grid[0];
        if !(d > 0.0) {
            return Err(Error::InvalidScatteringData("grid must be increasing".into()));
        }
        for j in 0..n {
            let l = self.lambda_grid[j];
            let mirror = self.lambda_grid[n - 1 - j];
            if (l + mirror).abs() > 1e-9 * d || (j > 0 && ((l - self.lambda_grid[j - 1]) - d).abs() > 1e-6 * d) {
                return Err(Error::InvalidScatteringData("grid must be uniform and symmetric".into()));
            }
        }
        if self.bound_states.len() != self.norming.len() {
            return Err(Error::InvalidScatteringData("bound_states and norming differ in length".into()));
        }
        if self.bound_states.iter().any(|&l| !(l > 0.0)) || self.bound_states.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidScatteringData("bound states must be positive and ascending".into()));
        }
        if self.norming.iter().any(|&m| !(m > 0.0 && m.is_finite())) {
            return Err(Error::InvalidScatteringData("norming numbers must be positive".into()));
        }
        if self.s_values.iter().any(|s| !(s.re.is_finite() && s.im.is_finite())) {
            return Err(Error::InvalidScatteringData("non-finite S sample".into()));
        }
        Ok(())
    }

    /// `max_j |conj(S(-lambda_j)) - S(lambda_j)|`.
    pub fn hermitian_defect(&self) -> f64 {
        let n = self.s_values.len();
        (0..n)
            .map(|j| (self.s_values[n - 1 - j].conj() - self.s_values[j]).norm())
            .fold(0.0, f64::max)
    }

    pub fn lambda_step(&self) -> f64 {
        self.lambda_grid[1] - self.lambda_grid[0]
    }

    pub fn lambda_max(&self) -> f64 {
        self.lambda_grid[self.lambda_grid.len() - 1] + 0.5 * self.lambda_step()
    }
}
