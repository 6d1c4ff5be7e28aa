//! Problem and scattering files.

use anyhow::{bail, Context, Result};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use slscat::{BoundaryCoefficients, DensityProfile, NumericsConfig, PotentialSpec, ScatteringData};
use std::path::Path;

/// Ways to describe `q` in a problem file.
#[derive(Debug, Clone, Default, Serialize, Deserialize, PartialEq)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum PotentialInput {
    #[default]
    Zero,
    Samples {
        grid: Vec<f64>,
        values: Vec<f64>,
        #[serde(default)]
        support_bound: Option<f64>,
    },
    /// Gaussian cut to `[lo, hi]`, shifted to vanish at the ends and scaled to peak `height`.
    Gaussian { center: f64, width: f64, support: [f64; 2], height: f64 },
    /// Sum of `modes` random smooth bumps on `[lo, hi]`, scaled to peak `height`.
    Random { seed: u64, support: [f64; 2], modes: usize, height: f64 },
}

const SAMPLES: usize = 2000;

/// Samples `f` on `[lo, hi]`, preceded by a zero node at the origin.
fn sampled(lo: f64, hi: f64, f: impl Fn(f64) -> f64) -> Result<PotentialSpec> {
    let mut grid: Vec<f64> = (0..=SAMPLES).map(|i| lo + (hi - lo) * i as f64 / SAMPLES as f64).collect();
    if lo > 0.0 {
        grid.insert(0, 0.0);
    }
    let values = grid.iter().map(|&x| f(x)).collect();
    Ok(PotentialSpec::new(grid, values, hi)?)
}

fn bump(x: f64, lo: f64, hi: f64) -> f64 {
    if x <= lo || x >= hi {
        return 0.0;
    }
    let s = (x - lo) / (hi - lo);
    (s * (1.0 - s)).powi(3) * 64.0
}

impl PotentialInput {
    pub fn build(&self) -> Result<PotentialSpec> {
        Ok(match self {
            Self::Zero => PotentialSpec::zero(),
            Self::Samples { grid, values, support_bound } => {
                let sb = support_bound.unwrap_or_else(|| grid.last().copied().unwrap_or(0.0));
                PotentialSpec::new(grid.clone(), values.clone(), sb)?
            }
            &Self::Gaussian { center, width, support: [lo, hi], height } => {
                if !(lo >= 0.0 && hi > lo && width > 0.0) {
                    bail!(slscat::Error::InvalidPotential("gaussian needs 0 <= lo < hi and width > 0".into()));
                }
                let g = |t: f64| (-(t - center).powi(2) / (2.0 * width * width)).exp();
                let edge = g(lo).max(g(hi));
                let peak = g(center.clamp(lo, hi));
                let f = move |x: f64| {
                    if x < lo || x > hi {
                        0.0
                    } else {
                        height * (g(x) - edge).max(0.0) / (peak - edge)
                    }
                };
                sampled(lo, hi, f)?
            }
            &Self::Random { seed, support: [lo, hi], modes, height } => {
                if !(lo >= 0.0 && hi > lo && modes > 0) {
                    bail!(slscat::Error::InvalidPotential("random needs 0 <= lo < hi and modes > 0".into()));
                }
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let parts: Vec<(f64, f64, f64)> = (0..modes)
                    .map(|_| {
                        let w = rng.gen_range(0.3..1.0) * (hi - lo);
                        let s = rng.gen_range(lo..=hi - w);
                        (s, s + w, rng.gen_range(-1.0..1.0))
                    })
                    .collect();
                let raw = move |x: f64| parts.iter().map(|&(a, b, c)| c * bump(x, a, b)).sum::<f64>();
                let peak = (0..=SAMPLES)
                    .map(|i| raw(lo + (hi - lo) * i as f64 / SAMPLES as f64).abs())
                    .fold(0.0, f64::max)
                    .max(f64::MIN_POSITIVE);
                sampled(lo, hi, move |x| height * raw(x) / peak)?
            }
        })
    }
}

/// Partial numerics; unset fields take their defaults.
#[derive(Debug, Clone, Default, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct NumericsInput {
    pub x_max: Option<f64>,
    pub h_x: Option<f64>,
    pub lambda_max: Option<f64>,
    pub n_lambda: Option<usize>,
    pub y_max: Option<f64>,
    pub root_tol: Option<f64>,
    pub quad_tol: Option<f64>,
    pub solve_tol: Option<f64>,
    pub mu_max: Option<f64>,
    pub tail_order: Option<usize>,
    pub tail_window: Option<f64>,
}

impl NumericsInput {
    pub fn apply(&self, mut cfg: NumericsConfig) -> NumericsConfig {
        macro_rules! set {
            ($($f:ident),*) => { $( if let Some(v) = self.$f { cfg.$f = v; } )* };
        }
        set!(x_max, h_x, lambda_max, n_lambda, root_tol, quad_tol, solve_tol, tail_order, tail_window);
        if self.y_max.is_some() {
            cfg.y_max = self.y_max;
        }
        if self.mu_max.is_some() {
            cfg.mu_max = self.mu_max;
        }
        cfg
    }

    /// `other` wins where set.
    pub fn merged(&self, other: &NumericsInput) -> NumericsInput {
        macro_rules! pick {
            ($($f:ident),*) => { NumericsInput { $( $f: other.$f.or(self.$f), )* } };
        }
        pick!(x_max, h_x, lambda_max, n_lambda, y_max, root_tol, quad_tol, solve_tol, mu_max, tail_order, tail_window)
    }
}

/// Pass/fail thresholds for the round-trip report.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct Tolerances {
    pub sup_relative: f64,
    pub l1_relative: f64,
    /// Absolute bound on `max |q_rec|` when the true potential vanishes.
    pub zero_absolute: f64,
    pub jump_residual: f64,
    pub condition: f64,
    /// Allowed growth of an error under refinement.
    pub refinement_slack: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            sup_relative: 0.05,
            l1_relative: 0.03,
            zero_absolute: 1e-3,
            jump_residual: 0.05,
            condition: 1e6,
            refinement_slack: 1e-3,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ProblemFile {
    pub alpha: f64,
    pub a: f64,
    pub boundary: BoundaryCoefficients,
    #[serde(default)]
    pub potential: PotentialInput,
    #[serde(default)]
    pub numerics: NumericsInput,
    #[serde(default)]
    pub degenerate_alpha_ok: bool,
    #[serde(default)]
    pub tolerances: Tolerances,
}

/// A problem turned into library objects.
pub struct Problem {
    pub file: ProblemFile,
    pub profile: DensityProfile,
    pub boundary: BoundaryCoefficients,
    pub potential: PotentialSpec,
    pub numerics: NumericsConfig,
}

impl ProblemFile {
    pub fn resolve(&self, overrides: &NumericsInput, degenerate_ok: bool) -> Result<Problem> {
        let profile = DensityProfile::with_mode(self.alpha, self.a, degenerate_ok || self.degenerate_alpha_ok)?;
        slscat::validate_boundary(&self.boundary)?;
        let potential = self.potential.build()?;
        let numerics = self.numerics.merged(overrides).apply(NumericsConfig::default_for(&profile, &potential));
        numerics.validate(&profile, &potential)?;
        Ok(Problem { file: self.clone(), profile, boundary: self.boundary, potential, numerics })
    }
}

/// `scattering.json`: the data plus the problem that produced it.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ScatteringFile {
    pub lambda_grid: Vec<f64>,
    pub s_re: Vec<f64>,
    pub s_im: Vec<f64>,
    pub bound_states: Vec<f64>,
    pub norming: Vec<f64>,
    pub problem: ProblemFile,
}

impl ScatteringFile {
    pub fn new(sd: &ScatteringData, problem: &ProblemFile) -> Self {
        Self {
            lambda_grid: sd.lambda_grid.clone(),
            s_re: sd.s_values.iter().map(|s| s.re).collect(),
            s_im: sd.s_values.iter().map(|s| s.im).collect(),
            bound_states: sd.bound_states.clone(),
            norming: sd.norming.clone(),
            problem: problem.clone(),
        }
    }

    pub fn data(&self) -> Result<ScatteringData> {
        if self.s_re.len() != self.lambda_grid.len() || self.s_im.len() != self.lambda_grid.len() {
            bail!(slscat::Error::InvalidScatteringData(format!(
                "lambda_grid has {} samples, s_re {}, s_im {}",
                self.lambda_grid.len(),
                self.s_re.len(),
                self.s_im.len()
            )));
        }
        let sd = ScatteringData {
            lambda_grid: self.lambda_grid.clone(),
            s_values: self.s_re.iter().zip(&self.s_im).map(|(&r, &i)| Complex64::new(r, i)).collect(),
            bound_states: self.bound_states.clone(),
            norming: self.norming.clone(),
        };
        sd.validate()?;
        Ok(sd)
    }
}

/// Input file could not be read or parsed; maps to the validation exit code.
#[derive(Debug)]
pub struct InputError(pub String);

impl std::fmt::Display for InputError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for InputError {}

pub fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| InputError(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text)
        .map_err(|e| InputError(format!("{}: {e}", path.display())))
        .context("invalid input file")
}
