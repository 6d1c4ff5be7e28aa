//! `slscat`: forward and inverse scattering from the command line.
//!
//! Exit codes: 0 success, 1 a checked invariant failed, 2 invalid input,
//! 3 numerical failure.

mod commands;
mod output;
mod problem;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use problem::{read_json, InputError, NumericsInput, ProblemFile, ScatteringFile};

#[derive(Parser)]
#[command(name = "slscat", version, about = "Scattering for -y'' + q y = l^2 rho y with a density step")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Scattering data of a problem file.
    Forward(Common),
    /// Potential from a scattering file.
    Inverse {
        #[command(flatten)]
        common: Common,
        /// Problem file overriding the one embedded in the scattering file.
        #[arg(long)]
        problem: Option<PathBuf>,
        /// Skip the solve at half the step.
        #[arg(long)]
        no_refine: bool,
    },
    /// Forward map, inverse map and comparison.
    Roundtrip {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        no_refine: bool,
    },
    /// Invariant suite for a problem file.
    Verify {
        #[command(flatten)]
        common: Common,
        /// Check the symmetry of these scattering data instead of freshly computed ones.
        #[arg(long)]
        scattering: Option<PathBuf>,
    },
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    input: PathBuf,
    #[arg(long, default_value = "out")]
    out_dir: PathBuf,
    /// Worker threads; all cores when unset.
    #[arg(long, env = "SLSCAT_WORKERS")]
    workers: Option<usize>,
    #[arg(long)]
    hx: Option<f64>,
    #[arg(long)]
    lambda_max: Option<f64>,
    #[arg(long)]
    n_lambda: Option<usize>,
    #[arg(long)]
    ymax: Option<f64>,
    /// Allow alpha = 1 (validation mode).
    #[arg(long)]
    degenerate_alpha_ok: bool,
    /// Also write the full kernel table to kernel.csv.
    #[arg(long)]
    dump_kernel: bool,
}

impl Common {
    fn overrides(&self) -> NumericsInput {
        NumericsInput {
            h_x: self.hx,
            lambda_max: self.lambda_max,
            n_lambda: self.n_lambda,
            y_max: self.ymax,
            ..Default::default()
        }
    }

    fn prepare(&self) -> Result<()> {
        if let Some(n) = self.workers {
            rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global().ok();
        }
        if !self.input.exists() {
            return Err(InputError(format!("input {} does not exist", self.input.display())).into());
        }
        create_dir(&self.out_dir)
    }
}

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}

/// `Ok(false)` when an invariant failed.
fn run(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Forward(c) => {
            c.prepare()?;
            let pf: ProblemFile = read_json(&c.input)?;
            let pb = pf.resolve(&c.overrides(), c.degenerate_alpha_ok)?;
            commands::forward(&pb, &c.out_dir)?;
            Ok(true)
        }
        Command::Inverse { common: c, problem, no_refine } => {
            c.prepare()?;
            let file: ScatteringFile = read_json(&c.input)?;
            let other = problem.map(|p| read_json::<ProblemFile>(&p)).transpose()?;
            let pf = commands::inverse_problem(&file, other);
            let mut over = c.overrides();
            // the spectral grid belongs to the data
            over.lambda_max = None;
            over.n_lambda = None;
            let pb = pf.resolve(&over, c.degenerate_alpha_ok)?;
            commands::inverse_cmd(&file, &pb, &c.out_dir, !no_refine, c.dump_kernel)?;
            Ok(true)
        }
        Command::Roundtrip { common: c, no_refine } => {
            c.prepare()?;
            let pf: ProblemFile = read_json(&c.input)?;
            let pb = pf.resolve(&c.overrides(), c.degenerate_alpha_ok)?;
            commands::roundtrip_cmd(&pb, &c.out_dir, !no_refine, c.dump_kernel)
        }
        Command::Verify { common: c, scattering } => {
            c.prepare()?;
            let pf: ProblemFile = read_json(&c.input)?;
            let pb = pf.resolve(&c.overrides(), c.degenerate_alpha_ok)?;
            let data = match scattering {
                Some(path) => Some(read_json::<ScatteringFile>(&path)?.data()?),
                None => None,
            };
            commands::verify_cmd(&pb, data.as_ref(), &c.out_dir)
        }
    }
}

fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if let Some(e) = cause.downcast_ref::<slscat::Error>() {
            return if e.is_validation() { 2 } else { 3 };
        }
        if cause.downcast_ref::<InputError>().is_some() {
            return 2;
        }
    }
    3
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
