//! Round trip for a Gaussian bump behind a density step, with timings.

use slscat::*;
use std::time::Instant;

fn main() -> Result<()> {
    let p = DensityProfile::new(2.0, 1.0)?;
    let c = BoundaryCoefficients::dirichlet();
    let bump = |x: f64| {
        let e = |t: f64| (-(t - 2.5) * (t - 2.5) / (2.0 * 0.25 * 0.25)).exp();
        if (1.5..=3.5).contains(&x) {
            (e(x) - e(1.5)) / (1.0 - e(1.5))
        } else {
            0.0
        }
    };
    let q = PotentialSpec::from_fn(3.5, 700, bump)?;
    let cfg = NumericsConfig::default_for(&p, &q);
    let refine = std::env::args().any(|a| a == "--refine");
    let t = Instant::now();
    let sd = forward_scattering(&p, &q, &c, &cfg)?;
    println!("forward: {:.2?}, bound states {:?}", t.elapsed(), sd.bound_states);
    let t = Instant::now();
    let r = roundtrip_with(&p, &c, &q, &cfg, refine)?;
    println!("roundtrip: {:.2?}", t.elapsed());
    println!("sup {:.3e} l1 {:.3e} jump {:.3e}", r.errors.sup, r.errors.l1, r.jump_residual);
    let cmax = r.condition_numbers.iter().cloned().fold(0.0, f64::max);
    println!("max cond {cmax:.3e} tail {:.2e}", r.kernel.tail_magnitude());
    for (i, x) in r.x_nodes.iter().enumerate().step_by(25) {
        println!("{x:6.3} {:+.5} {:+.5}", r.q_true[i], r.q_rec[i]);
    }
    if let Some(f) = &r.refinement {
        println!("refined: {f:?}");
    }
    Ok(())
}
