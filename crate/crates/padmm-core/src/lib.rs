//! Online perturbed proximal-ADMM for time-varying two-block convex problems.
//!
//! The library targets problems of the form
//!
//! ```text
//!   minimize   f0(x) + f1(x) + g0(y) + g1(y)
//!   subject to A x + B y = b
//! ```
//!
//! where the data (including the objective pieces) may change at every time
//! step. `f1`, `g1` are smooth with Lipschitz gradients, `f0`, `g0` are
//! proximable (possibly nonsmooth), and the combined `f`, `g` are strongly
//! convex. One online iteration performs a proximal gradient step on `y`, then
//! on `x`, then a perturbed dual ascent step that shrinks the multiplier by
//! `1 - beta*gamma`. The shrink factor is what turns the method into a
//! contraction: iterates track the *perturbed* KKT point of each snapshot at a
//! geometric rate, with a tracking error proportional to how fast the
//! snapshots drift.
//!
//! Crate layout:
//!
//! * [`atoms`] — composable convex function pieces (quadratic, weighted L1,
//!   box/nonnegativity indicators) with exact gradients and proximal maps.
//! * [`problem`] — a single time-step instance ([`ProblemSnapshot`]).
//! * [`params`] — curvature/norm bounds, step-size selection, admissibility
//!   checking, and the weighted norm used by all contraction statements.
//! * [`solver`] — the augmented Lagrangian, one online step, and the driver.
//! * [`oracle`] — high-accuracy perturbed/unperturbed KKT solutions, residuals,
//!   drift measurement, and tracking bounds.
//! * [`scenario`] — seeded generators: a bilinear saddle toy, drifting
//!   strongly convex QP streams, and a synthetic multi-area grid dispatch
//!   family.
//!
//! The crate is `no_std`-compatible (requires `alloc`); the default `std`
//! feature only forwards to the dependencies' `std` features.

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

use alloc::string::String;

pub mod atoms;
pub mod oracle;
pub mod params;
pub mod problem;
pub mod scenario;
pub mod solver;

mod linalg;

pub use nalgebra;

pub use atoms::{Atom, SeparableFunction};
pub use oracle::{
    akkt_residual, measure_drifts, predicted_sigma_lambda, solve_akkt, solve_akkt_trajectory,
    solve_akkt_with, tracking_bound, DriftEstimate, OracleMethod, OracleOptions, OracleSolution,
};
pub use params::{
    bounds_from_snapshots, check_admissibility, manual_params, select_params, AdmissibilityReport,
    BoundsProfile, GMetric, SolverParams,
};
pub use problem::ProblemSnapshot;
pub use solver::{
    lagrangian_value, run_online, run_static, smooth_lagrangian, smooth_lagrangian_grad_x,
    smooth_lagrangian_grad_y, step, RunFailure, SolverState, StepRecord, Trajectory,
};

/// Errors produced by construction and validation across the crate.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum CoreError {
    #[error("dimension mismatch for {what}: expected {expected}, got {got}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("invalid {what}: {detail}")]
    Invalid { what: &'static str, detail: String },
    #[error("atom ranges do not partition the variable vector: {detail}")]
    BadPartition { detail: String },
    #[error("{what} requires smooth atoms only")]
    NotSmooth { what: &'static str },
    #[error("non-finite value encountered in {what}")]
    NonFinite { what: &'static str },
    #[error("iterates diverged: G-norm {g_norm:e} exceeded the threshold")]
    Diverged { g_norm: f64 },
    #[error("empty snapshot sequence")]
    EmptySequence,
    #[error("strong convexity bound is not positive for block {block}")]
    ZeroCurvature { block: &'static str },
    #[error("inadmissible parameters: {detail}")]
    Inadmissible { detail: String },
    #[error("linear system is singular")]
    SingularSystem,
    #[error("iteration cap reached with residual {best_residual:e}")]
    IterationCap { best_residual: f64 },
    #[error("snapshot time index {snapshot} does not follow state time index {state}")]
    TimeIndexMismatch { snapshot: u64, state: i64 },
}
