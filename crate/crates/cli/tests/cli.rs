use serde_json::{json, Value};
use std::path::Path;
use std::process::{Command, Output};
use tempfile::TempDir;

fn slscat(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_slscat")).args(args).env_remove("SLSCAT_WORKERS").output().unwrap()
}

fn write(dir: &Path, name: &str, v: &Value) -> String {
    let p = dir.join(name);
    std::fs::write(&p, serde_json::to_string_pretty(v).unwrap()).unwrap();
    p.to_str().unwrap().to_owned()
}

fn read(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn dirichlet() -> Value {
    json!({"alpha0": 1.0, "alpha1": 0.0, "alpha2": 0.0, "beta0": 0.0, "beta1": 0.0, "beta2": 0.0})
}

fn coarse() -> Value {
    json!({"h_x": 0.05, "n_lambda": 512})
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn forward_free_dirichlet_has_no_bound_states() {
    let d = TempDir::new().unwrap();
    let pf = write(d.path(), "p.json", &json!({"alpha": 2.0, "a": 1.0, "boundary": dirichlet(), "numerics": coarse()}));
    let out = d.path().join("out");
    let o = slscat(&["forward", "--input", &pf, "--out-dir", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let s = read(&out.join("scattering.json"));
    assert_eq!(s["bound_states"].as_array().unwrap().len(), 0);
    assert_eq!(s["lambda_grid"].as_array().unwrap().len(), 512);
    let csv = std::fs::read_to_string(out.join("scattering.csv")).unwrap();
    assert!(csv.starts_with("lambda,s_re,s_im,abs_s_minus_s0\n"));
    // S = S0 exactly for q = 0 with a Dirichlet end
    for line in csv.lines().skip(1) {
        let last: f64 = line.rsplit(',').next().unwrap().parse().unwrap();
        assert!(last < 1e-12);
    }
}

#[test]
fn output_is_deterministic() {
    let d = TempDir::new().unwrap();
    let pf = write(
        d.path(),
        "p.json",
        &json!({"alpha": 2.0, "a": 1.0, "boundary": dirichlet(), "numerics": coarse(),
                "potential": {"random": {"seed": 5, "support": [1.2, 2.5], "modes": 2, "height": 0.8}}}),
    );
    let a = d.path().join("a");
    let b = d.path().join("b");
    assert!(slscat(&["forward", "--input", &pf, "--out-dir", a.to_str().unwrap()]).status.success());
    assert!(slscat(&["forward", "--input", &pf, "--out-dir", b.to_str().unwrap(), "--workers", "1"]).status.success());
    let x = std::fs::read(a.join("scattering.json")).unwrap();
    let y = std::fs::read(b.join("scattering.json")).unwrap();
    assert_eq!(x, y);
}

#[test]
fn missing_field_exits_2() {
    let d = TempDir::new().unwrap();
    let pf = write(d.path(), "p.json", &json!({"a": 1.0, "boundary": dirichlet()}));
    let o = slscat(&["forward", "--input", &pf, "--out-dir", d.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("alpha"), "{}", stderr(&o));
}

#[test]
fn sign_violation_exits_2() {
    let d = TempDir::new().unwrap();
    let bc = json!({"alpha0": 1.0, "alpha1": 0.0, "alpha2": 0.0, "beta0": 0.0, "beta1": 1.0, "beta2": 0.0});
    let pf = write(d.path(), "p.json", &json!({"alpha": 2.0, "a": 1.0, "boundary": bc}));
    let o = slscat(&["forward", "--input", &pf, "--out-dir", d.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("SignConditionViolated: delta1"), "{}", stderr(&o));
}

#[test]
fn unit_density_needs_flag() {
    let d = TempDir::new().unwrap();
    let pf = write(d.path(), "p.json", &json!({"alpha": 1.0, "a": 1.0, "boundary": dirichlet(), "numerics": coarse()}));
    let out = d.path().to_str().unwrap();
    let o = slscat(&["forward", "--input", &pf, "--out-dir", out]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("DegenerateDensity"));
    let o = slscat(&["forward", "--input", &pf, "--out-dir", out, "--degenerate-alpha-ok"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
}

#[test]
fn zero_data_inverts_to_zero() {
    let d = TempDir::new().unwrap();
    let pf = write(d.path(), "p.json", &json!({"alpha": 2.0, "a": 1.0, "boundary": dirichlet(), "numerics": coarse()}));
    let f = d.path().join("f");
    assert!(slscat(&["forward", "--input", &pf, "--out-dir", f.to_str().unwrap()]).status.success());
    let inv = d.path().join("inv");
    let o = slscat(&[
        "inverse",
        "--input",
        f.join("scattering.json").to_str().unwrap(),
        "--out-dir",
        inv.to_str().unwrap(),
        "--dump-kernel",
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let r = read(&inv.join("report.json"));
    assert!(r["max_abs_q_rec"].as_f64().unwrap() < 1e-10);
    assert!(r["refinement_delta"].as_f64().unwrap() < 1e-10);
    assert!(inv.join("q_rec.csv").exists() && inv.join("cond.csv").exists() && inv.join("kernel.csv").exists());
}

#[test]
fn corrupted_symmetry_exits_2_on_inverse_and_1_on_verify() {
    let d = TempDir::new().unwrap();
    let problem = json!({"alpha": 2.0, "a": 1.0, "boundary": dirichlet(), "numerics": coarse()});
    let pf = write(d.path(), "p.json", &problem);
    let f = d.path().join("f");
    assert!(slscat(&["forward", "--input", &pf, "--out-dir", f.to_str().unwrap()]).status.success());
    let mut s = read(&f.join("scattering.json"));
    let v = s["s_im"][7].as_f64().unwrap();
    s["s_im"][7] = json!(v + 0.5);
    let bad = write(d.path(), "bad.json", &s);
    let o = slscat(&["inverse", "--input", &bad, "--out-dir", d.path().join("i").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("NonHermitianData"), "{}", stderr(&o));
    let v = d.path().join("v");
    let o = slscat(&["verify", "--input", &pf, "--scattering", &bad, "--out-dir", v.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    let rep = read(&v.join("verification.json"));
    let sym = rep["checks"].as_array().unwrap().iter().find(|c| c["name"] == "s_symmetry").unwrap();
    assert_eq!(sym["passed"], json!(false));
}

#[test]
fn verify_free_dirichlet_passes() {
    let d = TempDir::new().unwrap();
    let pf = write(d.path(), "p.json", &json!({"alpha": 2.0, "a": 1.0, "boundary": dirichlet(), "numerics": coarse()}));
    let v = d.path().join("v");
    let o = slscat(&["verify", "--input", &pf, "--out-dir", v.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stdout));
    assert_eq!(read(&v.join("verification.json"))["passed"], json!(true));
}

#[test]
fn roundtrip_zero_potential_report() {
    let d = TempDir::new().unwrap();
    let bc = json!({"alpha0": 1.5, "alpha1": 0.0, "alpha2": 0.0, "beta0": 1.0, "beta1": 0.0, "beta2": 0.0});
    let pf = write(d.path(), "p.json", &json!({"alpha": 2.0, "a": 1.0, "boundary": bc, "numerics": {"h_x": 0.02}}));
    let out = d.path().join("r");
    let o = slscat(&["roundtrip", "--input", &pf, "--out-dir", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stdout));
    let r = read(&out.join("report.json"));
    assert_eq!(r["absolute"], json!(true));
    assert!(r["sup_error"].as_f64().unwrap() < 1e-3);
    assert!(r["refined_sup_error"].as_f64().unwrap() <= r["sup_error"].as_f64().unwrap() + 1e-3);
}

#[test]
fn soliton_file_inverts_to_closed_form() {
    let (kappa, m2) = (1.0f64, 3.0f64);
    let n = 1024;
    let lmax = 40.0;
    let dl = 2.0 * lmax / n as f64;
    let grid: Vec<f64> = (0..n).map(|j| (j as f64 - n as f64 / 2.0 + 0.5) * dl).collect();
    let file = json!({
        "lambda_grid": grid,
        "s_re": vec![1.0; n],
        "s_im": vec![0.0; n],
        "bound_states": [kappa],
        "norming": [m2.sqrt()],
        "problem": {"alpha": 1.0, "a": 1.0, "boundary": dirichlet(), "degenerate_alpha_ok": true}
    });
    let d = TempDir::new().unwrap();
    let sf = write(d.path(), "s.json", &file);
    let out = d.path().join("i");
    let o = slscat(&["inverse", "--input", &sf, "--out-dir", out.to_str().unwrap(), "--no-refine"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let mut rdr = csv::Reader::from_path(out.join("q_rec.csv")).unwrap();
    let mut worst: f64 = 0.0;
    let mut peak: f64 = 0.0;
    for rec in rdr.records() {
        let rec = rec.unwrap();
        let x: f64 = rec[0].parse().unwrap();
        let q: f64 = rec[2].parse().unwrap();
        let u = m2 * (-2.0 * kappa * x).exp();
        let exact = -4.0 * kappa * u / (1.0 + u / (2.0 * kappa)).powi(2);
        worst = worst.max((q - exact).abs());
        peak = peak.max(exact.abs());
    }
    assert!(worst / peak < 0.01, "{}", worst / peak);
}

#[test]
fn tiny_condition_bound_exits_3() {
    let d = TempDir::new().unwrap();
    let pf = write(
        d.path(),
        "p.json",
        &json!({"alpha": 2.0, "a": 1.0, "boundary": dirichlet(),
                "numerics": {"h_x": 0.05, "n_lambda": 512, "solve_tol": 0.9}}),
    );
    let o = slscat(&["roundtrip", "--input", &pf, "--out-dir", d.path().to_str().unwrap(), "--no-refine"]);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
    assert!(stderr(&o).contains("IllConditioned") && stderr(&o).contains("at x ="), "{}", stderr(&o));
}

#[test]
fn missing_input_exits_2() {
    let d = TempDir::new().unwrap();
    let o = slscat(&["forward", "--input", "/nonexistent/p.json", "--out-dir", d.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}
