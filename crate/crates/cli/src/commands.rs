//! The four subcommands.

use anyhow::Result;
use num_complex::Complex64;
use serde::Serialize;
use slscat::{
    bound_states_detailed, f0s_transform, f_cancellation, find_bound_states, forward_with_characteristic,
    inverse, kernel_difference, kernel_grid, roundtrip_with, verify_zero_count, wronskian,
    FamilyOptions, JostSolver, KernelTable, NumericsConfig, SZero, ScatteringData,
};
use std::path::Path;

use crate::output::{write_csv, write_json};
use crate::problem::{Problem, ProblemFile, ScatteringFile};

fn s_minus_s0(sd: &ScatteringData, s0: &SZero) -> Vec<Vec<f64>> {
    sd.lambda_grid
        .iter()
        .zip(&sd.s_values)
        .map(|(&l, s)| vec![l, s.re, s.im, (s - s0.eval(l)).norm()])
        .collect()
}

pub fn forward(pb: &Problem, out: &Path) -> Result<()> {
    let (sd, _) = forward_with_characteristic(&pb.profile, &pb.potential, &pb.boundary, &pb.numerics)?;
    let s0 = SZero::new(&pb.profile, &pb.boundary)?;
    write_json(&out.join("scattering.json"), &ScatteringFile::new(&sd, &pb.file))?;
    write_csv(&out.join("scattering.csv"), &["lambda", "s_re", "s_im", "abs_s_minus_s0"], s_minus_s0(&sd, &s0))?;
    println!("forward: {} samples, bound states {:?}", sd.lambda_grid.len(), sd.bound_states);
    Ok(())
}

fn dump_kernel(kt: &KernelTable, path: &Path) -> Result<()> {
    let rows = kt.rows.iter().enumerate().flat_map(|(ix, r)| {
        kt.y_nodes(ix).into_iter().zip(r.values.clone()).map(move |(y, k)| vec![r.x, y, k])
    });
    write_csv(path, &["x", "y", "k"], rows)
}

fn write_profiles(out: &Path, x: &[f64], q: &[f64], q_rec: &[f64], cond: &[f64]) -> Result<()> {
    write_csv(
        &out.join("q_rec.csv"),
        &["x", "q", "q_rec"],
        x.iter().zip(q).zip(q_rec).map(|((&x, &q), &r)| vec![x, q, r]),
    )?;
    write_csv(&out.join("cond.csv"), &["x", "cond"], x.iter().zip(cond).map(|(&x, &c)| vec![x, c]))
}

fn worst_condition(x: &[f64], cond: &[f64]) -> (f64, f64) {
    x.iter()
        .zip(cond)
        .filter(|(_, c)| c.is_finite())
        .fold((f64::NAN, 0.0), |b, (&x, &c)| if c > b.1 { (x, c) } else { b })
}

#[derive(Serialize)]
struct InverseReport {
    jump_residual: f64,
    max_condition: f64,
    worst_condition_x: f64,
    /// `sup |K_h - K_{h/2}|` at fixed data; `null` when skipped.
    refinement_delta: Option<f64>,
    max_abs_q_rec: f64,
    kernel_tail: f64,
    tail_fit_residual: f64,
    x: Vec<f64>,
    condition_numbers: Vec<f64>,
}

pub fn inverse_cmd(file: &ScatteringFile, pb: &Problem, out: &Path, refine: bool, dump: bool) -> Result<()> {
    let sd = file.data()?;
    let cfg = &pb.numerics;
    let inv = inverse(&sd, &pb.profile, &pb.boundary, cfg, FamilyOptions::default())?;
    let x = inv.kernel.x_nodes().to_vec();
    let cond = inv.kernel.condition_numbers();
    let refinement_delta = if refine {
        let fine = NumericsConfig { h_x: cfg.h_x / 2.0, ..cfg.clone() };
        let finv = inverse(&sd, &pb.profile, &pb.boundary, &fine, FamilyOptions { condition: false, dense: false })?;
        Some(kernel_difference(&inv.kernel, &finv.kernel))
    } else {
        None
    };
    let q: Vec<f64> = x.iter().map(|&x| pb.potential.eval(x)).collect();
    write_profiles(out, &x, &q, &inv.q_rec, &cond)?;
    if dump {
        dump_kernel(&inv.kernel, &out.join("kernel.csv"))?;
    }
    let (wx, wc) = worst_condition(&x, &cond);
    let report = InverseReport {
        jump_residual: inv.jump_residual,
        max_condition: wc,
        worst_condition_x: wx,
        refinement_delta,
        max_abs_q_rec: inv.q_rec.iter().fold(0.0, |m, v| m.max(v.abs())),
        kernel_tail: inv.kernel.tail_magnitude(),
        tail_fit_residual: inv.table.tail.fit_residual,
        x,
        condition_numbers: cond,
    };
    write_json(&out.join("report.json"), &report)?;
    println!(
        "inverse: max |q_rec| {:.3e}, jump residual {:.3e}, max condition {:.3e}",
        report.max_abs_q_rec, report.jump_residual, report.max_condition
    );
    Ok(())
}

#[derive(Serialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub threshold: f64,
    pub passed: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl Check {
    fn below(name: &str, value: f64, threshold: f64) -> Self {
        Self { name: name.into(), value, threshold, passed: value < threshold, note: None }
    }

    fn above(name: &str, value: f64, threshold: f64) -> Self {
        Self { name: name.into(), value, threshold, passed: value > threshold, note: None }
    }

    fn skipped(name: &str, why: &str) -> Self {
        Self { name: name.into(), value: f64::NAN, threshold: f64::NAN, passed: true, note: Some(why.into()) }
    }

    fn failed(name: &str, err: &dyn std::fmt::Display) -> Self {
        Self { name: name.into(), value: f64::NAN, threshold: f64::NAN, passed: false, note: Some(err.to_string()) }
    }
}

#[derive(Serialize)]
struct RoundtripReport {
    sup_error: f64,
    l1_error: f64,
    /// True when the errors are absolute because the potential vanishes.
    absolute: bool,
    jump_residual: f64,
    max_condition: f64,
    worst_condition_x: f64,
    refinement_delta: Option<f64>,
    refined_sup_error: Option<f64>,
    refined_l1_error: Option<f64>,
    refined_q_delta: Option<f64>,
    checks: Vec<Check>,
    passed: bool,
}

/// Returns whether every check passed.
pub fn roundtrip_cmd(pb: &Problem, out: &Path, refine: bool, dump: bool) -> Result<bool> {
    let r = roundtrip_with(&pb.profile, &pb.boundary, &pb.potential, &pb.numerics, refine)?;
    let tol = &pb.file.tolerances;
    let absolute = pb.potential.is_zero();
    let (wx, wc) = worst_condition(&r.x_nodes, &r.condition_numbers);
    let mut checks = Vec::new();
    if absolute {
        checks.push(Check::below("zero_potential_sup", r.errors.sup, tol.zero_absolute));
    } else {
        checks.push(Check::below("sup_relative", r.errors.sup, tol.sup_relative));
        checks.push(Check::below("l1_relative", r.errors.l1, tol.l1_relative));
    }
    checks.push(Check::below("jump_residual", r.jump_residual, tol.jump_residual));
    checks.push(Check::below("condition", wc, tol.condition));
    if let Some(f) = &r.refinement {
        let slack = tol.refinement_slack;
        checks.push(Check::below("refined_sup_not_worse", f.errors.sup - r.errors.sup, slack));
        checks.push(Check::below("refined_l1_not_worse", f.errors.l1 - r.errors.l1, slack));
    }
    let passed = checks.iter().all(|c| c.passed);
    write_profiles(out, &r.x_nodes, &r.q_true, &r.q_rec, &r.condition_numbers)?;
    write_json(&out.join("scattering.json"), &ScatteringFile::new(&r.data, &pb.file))?;
    if dump {
        dump_kernel(&r.kernel, &out.join("kernel.csv"))?;
    }
    let f = r.refinement.as_ref();
    let report = RoundtripReport {
        sup_error: r.errors.sup,
        l1_error: r.errors.l1,
        absolute,
        jump_residual: r.jump_residual,
        max_condition: wc,
        worst_condition_x: wx,
        refinement_delta: f.map(|f| f.kernel_delta),
        refined_sup_error: f.map(|f| f.errors.sup),
        refined_l1_error: f.map(|f| f.errors.l1),
        refined_q_delta: f.map(|f| f.q_delta),
        checks,
        passed,
    };
    write_json(&out.join("report.json"), &report)?;
    for c in &report.checks {
        println!("{:<24} {:<4} {:.3e} (threshold {:.1e})", c.name, if c.passed { "ok" } else { "FAIL" }, c.value, c.threshold);
    }
    Ok(passed)
}

const WRONSKIAN_LAMBDAS: [f64; 5] = [0.5, 1.0, 2.0, 5.0, 10.0];

fn wronskian_residual(solver: &JostSolver) -> slscat::Result<f64> {
    let mut worst: f64 = 0.0;
    for l in WRONSKIAN_LAMBDAS {
        let e = solver.sample(Complex64::new(l, 0.0))?;
        let eb = solver.sample(Complex64::new(-l, 0.0))?;
        let target = Complex64::new(0.0, 2.0 * l);
        for w in wronskian(&e, &eb) {
            worst = worst.max((w - target).norm() / target.norm());
        }
    }
    Ok(worst)
}

fn symmetry(values: &[Complex64]) -> f64 {
    let n = values.len();
    (0..n).map(|j| (values[n - 1 - j].conj() - values[j]).norm()).fold(0.0, f64::max)
}

/// Returns whether every check passed.
pub fn verify_cmd(pb: &Problem, data: Option<&ScatteringData>, out: &Path) -> Result<bool> {
    let (p, q, c, cfg) = (&pb.profile, &pb.potential, &pb.boundary, &pb.numerics);
    let mut checks = Vec::new();
    let solver = JostSolver::new(p, q, cfg)?;
    checks.push(match wronskian_residual(&solver) {
        Ok(v) => Check::below("wronskian", v, 1e-6),
        Err(e) => Check::failed("wronskian", &e),
    });
    let (sd, chars) = forward_with_characteristic(p, q, c, cfg)?;
    let e: Vec<Complex64> = chars.iter().map(|v| v.e).collect();
    let e_max = e.iter().fold(0.0f64, |m, v| m.max(v.norm()));
    let s_checked = data.unwrap_or(&sd);
    checks.push(Check::below("s_symmetry", symmetry(&s_checked.s_values), 1e-8));
    checks.push(Check::below("e_symmetry", symmetry(&e) / e_max, 1e-8));
    let e_min = e.iter().fold(f64::INFINITY, |m, v| m.min(v.norm()));
    checks.push(Check::above("e_nonzero_on_real_axis", e_min, cfg.root_tol));
    match (find_bound_states(p, q, c, cfg), verify_zero_count(p, q, c, cfg)) {
        (Ok(roots), Ok(w)) => {
            let mut ck = Check::below("zero_count", (roots.len() as f64 - w as f64).abs(), 0.5);
            ck.note = Some(format!("bisection {}, winding {w}", roots.len()));
            checks.push(ck);
        }
        (Err(e), _) | (_, Err(e)) => checks.push(Check::failed("zero_count", &e)),
    }
    match bound_states_detailed(p, q, c, cfg) {
        Ok(bs) => {
            let slope = bs.iter().map(|b| b.derivative.abs()).fold(f64::INFINITY, f64::min);
            let inv = bs.iter().map(|b| b.m_k.powi(-2)).fold(f64::INFINITY, f64::min);
            if bs.is_empty() {
                checks.push(Check::skipped("norming_positive", "no bound states"));
            } else {
                checks.push(Check::above("simplicity", slope, 1e-6));
                checks.push(Check::above("norming_positive", inv, 0.0));
            }
        }
        Err(e) => checks.push(Check::failed("norming_positive", &e)),
    }
    if q.is_zero() {
        let res = f0s_transform(&sd, p, c, cfg).and_then(|tt| {
            let g = kernel_grid(&tt, p, cfg)?;
            f_cancellation(&tt, p, &g)
        });
        checks.push(match res {
            Ok((f, f0)) if f0 > 1e-8 => Check::below("f_cancellation", f / f0, 1e-5),
            Ok((f, _)) => Check::below("f_cancellation", f, 1e-8),
            Err(e) => Check::failed("f_cancellation", &e),
        });
    }
    let passed = checks.iter().all(|c| c.passed);
    #[derive(Serialize)]
    struct Verification<'a> {
        checks: &'a [Check],
        passed: bool,
    }
    write_json(&out.join("verification.json"), &Verification { checks: &checks, passed })?;
    for c in &checks {
        println!("{:<24} {:<4} {:.3e}", c.name, if c.passed { "ok" } else { "FAIL" }, c.value);
    }
    Ok(passed)
}

/// Problem for an `inverse` run: the embedded one unless another file is given.
pub fn inverse_problem(file: &ScatteringFile, other: Option<ProblemFile>) -> ProblemFile {
    let mut pf = other.unwrap_or_else(|| file.problem.clone());
    // the data fix the spectral grid
    let n = file.lambda_grid.len();
    if n >= 2 {
        let d = file.lambda_grid[1] - file.lambda_grid[0];
        pf.numerics.lambda_max = Some(file.lambda_grid[n - 1] + 0.5 * d);
        pf.numerics.n_lambda = Some(n);
    }
    pf
}
