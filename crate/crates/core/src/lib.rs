//! Forward and inverse scattering for `-y'' + q y = lambda^2 rho y` on the
//! half-line, with `rho = alpha^2` on `[0, a)` and `rho = 1` beyond, and a
//! boundary condition quadratic in `lambda`.
//!
//! The forward map produces `S(lambda)` on a real grid, the bound states
//! `i lambda_k` and the normalizing numbers `m_k`. The inverse map builds the
//! transition functions from those data, solves the main integral equation
//! for the kernel `K(x, y)` at every `x`, and reads `q` off the kernel
//! diagonal.

// `!(x > y)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod jost;
pub mod kernel;
pub mod marchenko;
pub mod model;
mod ode;
pub mod scattering;
pub mod special;

pub use error::{Delta, Error, Result};
pub use jost::{free_jost, jost_solution, regular_solution, wronskian, JostSample, JostSolver, RegularSample};
pub use model::{
    lambda_grid, validate_boundary, BoundaryCoefficients, DensityProfile, NumericsConfig, PotentialSpec,
    ScatteringData,
};
pub use num_complex::Complex64;
pub use ode::DenseSolution;
pub use scattering::{
    bound_states_detailed, characteristic, characteristic_at, find_bound_states, forward_scattering,
    forward_with_characteristic, norming_constants, s_zero, verify_zero_count, BoundState, CharacteristicValue, SZero,
};
pub use kernel::{f0_eval, f_cancellation, f0s_transform, f0s_transform_on, f_eval, fs_eval, KernelGrid, TailModel, TransitionTable};
pub use marchenko::{
    inverse, jump_consistency, kernel_difference, kernel_grid, reconstruct_potential, reconstruct_values,
    reconstruction_errors, roundtrip, roundtrip_with, solve_kernel_family, solve_kernel_family_with,
    solve_main_equation_at_x, FamilyOptions, InverseResult, KernelRow, KernelTable, ReconstructionErrors,
    ReconstructionReport, RefinementSummary,
};
