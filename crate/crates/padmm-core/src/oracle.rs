//! Ground-truth stationary points of one snapshot's perturbed optimality
//! system, plus drift measurement and tracking-bound evaluation.
//!
//! The perturbed stationarity conditions for a snapshot are
//! `0 in grad f1(x) + sub f0(x) - A' lambda`,
//! `0 in grad g1(y) + sub g0(y) - B' lambda`, and
//! `A x + B y - b + gamma*lambda = 0`; `gamma = 0` recovers the classical
//! stationarity system.

use alloc::string::String;
use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};

use crate::linalg;
use crate::params::{BoundsProfile, SolverParams};
use crate::problem::ProblemSnapshot;
use crate::solver::{step, SolverState};
use crate::CoreError;

/// Default residual tolerance for the direct linear-system method.
pub const LINEAR_SOLVE_TOLERANCE: f64 = 1e-10;
/// Default residual tolerance for the fixed-point iteration method.
pub const FIXED_POINT_TOLERANCE: f64 = 1e-8;
/// Default iteration cap for the fixed-point method.
pub const DEFAULT_ITERATION_CAP: usize = 1_000_000;
/// Stand-in perturbation used when the unperturbed stationary point of a
/// problem with nonsmooth atoms is requested: the fixed-point iteration has
/// no convergence guarantee at zero perturbation, so the system is solved
/// with this vanishing perturbation instead.
pub const UNPERTURBED_CONTINUATION_GAMMA: f64 = 1e-8;

/// How a stationary point was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OracleMethod {
    /// Dense solve of the stationarity equations (purely quadratic costs).
    LinearSolve,
    /// Static solver iteration run to a tight residual (general costs).
    FixedPointIteration,
}

/// A solved stationary point for one snapshot.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleSolution {
    /// Stationary point of the perturbed system at the requested `gamma`.
    pub w_star: SolverState,
    /// Stationary point of the unperturbed (`gamma = 0`) system, when
    /// requested via [`OracleOptions::with_unperturbed`].
    pub w_opt: Option<SolverState>,
    /// Residual of the perturbed stationarity system at `w_star`.
    pub akkt_residual: f64,
    pub method: OracleMethod,
}

/// Knobs for the stationary-point solvers.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleOptions {
    /// Residual tolerance; `None` uses the per-method default.
    pub tolerance: Option<f64>,
    /// Iteration cap for the fixed-point method.
    pub max_iterations: usize,
    /// Also solve the unperturbed system and fill `w_opt`.
    pub with_unperturbed: bool,
    /// Force a specific method instead of choosing by problem structure.
    pub force_method: Option<OracleMethod>,
}

impl Default for OracleOptions {
    fn default() -> Self {
        Self {
            tolerance: None,
            max_iterations: DEFAULT_ITERATION_CAP,
            with_unperturbed: false,
            force_method: None,
        }
    }
}

/// Residual of the perturbed stationarity system at `w`, with nonsmooth
/// stationarity certified through the proximal fixed-point identities:
/// `r_x = ||x - prox_{alpha1 f0}(x - alpha1*(grad f1(x) - A'lambda))||`,
/// `r_y` likewise with `alpha2`, `g`, and `B`, and
/// `r_c = ||A x + B y - b + gamma*lambda||`; the result is the Euclidean
/// norm of `(r_x, r_y, r_c)`.
pub fn akkt_residual(
    snap: &ProblemSnapshot,
    w: &SolverState,
    gamma: f64,
    p: &SolverParams,
) -> Result<f64, CoreError> {
    if w.x.len() != snap.dim_x() {
        return Err(CoreError::DimensionMismatch {
            what: "state x",
            expected: snap.dim_x(),
            got: w.x.len(),
        });
    }
    if w.y.len() != snap.dim_y() {
        return Err(CoreError::DimensionMismatch {
            what: "state y",
            expected: snap.dim_y(),
            got: w.y.len(),
        });
    }
    if w.lambda.len() != snap.dim_constraints() {
        return Err(CoreError::DimensionMismatch {
            what: "state lambda",
            expected: snap.dim_constraints(),
            got: w.lambda.len(),
        });
    }
    let drive_x = snap.f1().grad(&w.x)? - snap.a().tr_mul(&w.lambda);
    let rx = (&w.x - snap.f0().prox(&(&w.x - drive_x * p.alpha1), p.alpha1)?).norm();
    let drive_y = snap.g1().grad(&w.y)? - snap.b().tr_mul(&w.lambda);
    let ry = (&w.y - snap.g0().prox(&(&w.y - drive_y * p.alpha2), p.alpha2)?).norm();
    let rc = (snap.constraint_residual(&w.x, &w.y) + &w.lambda * gamma).norm();
    Ok(libm::sqrt(rx * rx + ry * ry + rc * rc))
}

/// Solves the perturbed stationarity equations of a purely quadratic
/// snapshot as one dense linear system:
/// `P_x x - A'lambda = -q_x`, `P_y y - B'lambda = -q_y`,
/// `A x + B y + gamma*lambda = b`.
fn solve_linear(snap: &ProblemSnapshot, gamma: f64) -> Result<SolverState, CoreError> {
    let not_quadratic = || CoreError::NotSmooth {
        what: "direct stationarity solve",
    };
    let (p0, q0, _) = snap.f0().as_quadratic().ok_or_else(not_quadratic)?;
    let (p1, q1, _) = snap.f1().as_quadratic().ok_or_else(not_quadratic)?;
    let (p2, q2, _) = snap.g0().as_quadratic().ok_or_else(not_quadratic)?;
    let (p3, q3, _) = snap.g1().as_quadratic().ok_or_else(not_quadratic)?;
    let px = p0 + p1;
    let qx = q0 + q1;
    let py = p2 + p3;
    let qy = q2 + q3;
    let (m, n, l) = (snap.dim_x(), snap.dim_y(), snap.dim_constraints());
    let total = m + n + l;
    let mut sys = DMatrix::zeros(total, total);
    sys.view_mut((0, 0), (m, m)).copy_from(&px);
    sys.view_mut((0, m + n), (m, l))
        .copy_from(&(-snap.a().transpose()));
    sys.view_mut((m, m), (n, n)).copy_from(&py);
    sys.view_mut((m, m + n), (n, l))
        .copy_from(&(-snap.b().transpose()));
    sys.view_mut((m + n, 0), (l, m)).copy_from(snap.a());
    sys.view_mut((m + n, m), (l, n)).copy_from(snap.b());
    for i in 0..l {
        sys[(m + n + i, m + n + i)] = gamma;
    }
    let mut rhs = DVector::zeros(total);
    rhs.rows_mut(0, m).copy_from(&(-&qx));
    rhs.rows_mut(m, n).copy_from(&(-&qy));
    rhs.rows_mut(m + n, l).copy_from(snap.rhs());
    let sol = linalg::lu_solve(sys, &rhs)?;
    Ok(SolverState::new(
        sol.rows(0, m).into_owned(),
        sol.rows(m, n).into_owned(),
        sol.rows(m + n, l).into_owned(),
        snap.time_index() as i64,
    ))
}

/// Runs the static solver iteration on the snapshot until the stationarity
/// residual falls under `tol`, starting from `warm` when given.
fn solve_fixed_point(
    snap: &ProblemSnapshot,
    gamma: f64,
    p: &SolverParams,
    tol: f64,
    cap: usize,
    warm: Option<&SolverState>,
) -> Result<(SolverState, f64), CoreError> {
    // The iteration only reads the step sizes, beta, and gamma; delta is
    // irrelevant here, so the requested gamma is patched in directly.
    let p_run = SolverParams { gamma, ..*p };
    let mut state = warm
        .cloned()
        .unwrap_or_else(|| SolverState::zeros(snap.dim_x(), snap.dim_y(), snap.dim_constraints()));
    state.time_index = snap.time_index() as i64;
    let mut best = akkt_residual(snap, &state, gamma, p)?;
    if best <= tol {
        return Ok((state, best));
    }
    for _ in 0..cap {
        state = step(snap, &state, &p_run)?;
        let res = akkt_residual(snap, &state, gamma, p)?;
        if res <= tol {
            return Ok((state, res));
        }
        best = best.min(res);
    }
    Err(CoreError::IterationCap {
        best_residual: best,
    })
}

fn is_quadratic(snap: &ProblemSnapshot) -> bool {
    snap.f0().as_quadratic().is_some()
        && snap.g0().as_quadratic().is_some()
        && snap.f1().as_quadratic().is_some()
        && snap.g1().as_quadratic().is_some()
}

fn solve_point(
    snap: &ProblemSnapshot,
    gamma: f64,
    p: &SolverParams,
    opts: &OracleOptions,
    warm: Option<&SolverState>,
) -> Result<(SolverState, f64, OracleMethod), CoreError> {
    let quadratic = is_quadratic(snap);
    let method = match opts.force_method {
        Some(OracleMethod::LinearSolve) if !quadratic => {
            return Err(CoreError::NotSmooth {
                what: "direct stationarity solve",
            })
        }
        Some(m) => m,
        None => {
            if quadratic {
                OracleMethod::LinearSolve
            } else {
                OracleMethod::FixedPointIteration
            }
        }
    };
    // Zero perturbation with nonsmooth atoms: fall back to the vanishing
    // perturbation the fixed-point method can still contract under.
    let (gamma_eff, method) = if gamma == 0.0 && method == OracleMethod::FixedPointIteration {
        (UNPERTURBED_CONTINUATION_GAMMA, method)
    } else {
        (gamma, method)
    };
    match method {
        OracleMethod::LinearSolve => {
            let tol = opts.tolerance.unwrap_or(LINEAR_SOLVE_TOLERANCE);
            let w = solve_linear(snap, gamma_eff)?;
            let res = akkt_residual(snap, &w, gamma_eff, p)?;
            if res <= tol {
                Ok((w, res, OracleMethod::LinearSolve))
            } else {
                // Ill-conditioned direct solve: polish with the iteration.
                let (w, res) = solve_fixed_point(
                    snap,
                    gamma_eff,
                    p,
                    tol,
                    opts.max_iterations,
                    Some(&w),
                )?;
                Ok((w, res, OracleMethod::FixedPointIteration))
            }
        }
        OracleMethod::FixedPointIteration => {
            let tol = opts.tolerance.unwrap_or(FIXED_POINT_TOLERANCE);
            let (w, res) = solve_fixed_point(snap, gamma_eff, p, tol, opts.max_iterations, warm)?;
            Ok((w, res, OracleMethod::FixedPointIteration))
        }
    }
}

/// Solves the perturbed stationarity system of one snapshot with default
/// options: the dense direct method for purely quadratic problems, the
/// fixed-point iteration otherwise.
pub fn solve_akkt(
    snap: &ProblemSnapshot,
    gamma: f64,
    p: &SolverParams,
) -> Result<OracleSolution, CoreError> {
    solve_akkt_with(snap, gamma, p, &OracleOptions::default())
}

/// [`solve_akkt`] with explicit options.
pub fn solve_akkt_with(
    snap: &ProblemSnapshot,
    gamma: f64,
    p: &SolverParams,
    opts: &OracleOptions,
) -> Result<OracleSolution, CoreError> {
    if !(gamma.is_finite() && gamma >= 0.0) {
        return Err(CoreError::Invalid {
            what: "oracle gamma",
            detail: String::from("gamma must be finite and nonnegative"),
        });
    }
    let (w_star, akkt_res, method) = solve_point(snap, gamma, p, opts, None)?;
    let w_opt = if opts.with_unperturbed {
        let (w, _, _) = solve_point(snap, 0.0, p, opts, Some(&w_star))?;
        Some(w)
    } else {
        None
    };
    Ok(OracleSolution {
        w_star,
        w_opt,
        akkt_residual: akkt_res,
        method,
    })
}

/// Solves the stationary point of every snapshot in sequence, warm-starting
/// each fixed-point solve from the previous stationary point.
pub fn solve_akkt_trajectory(
    snaps: &[ProblemSnapshot],
    gamma: f64,
    p: &SolverParams,
    opts: &OracleOptions,
) -> Result<Vec<OracleSolution>, CoreError> {
    if !(gamma.is_finite() && gamma >= 0.0) {
        return Err(CoreError::Invalid {
            what: "oracle gamma",
            detail: String::from("gamma must be finite and nonnegative"),
        });
    }
    let mut out = Vec::with_capacity(snaps.len());
    let mut warm: Option<SolverState> = None;
    for snap in snaps {
        let (w_star, akkt_res, method) = solve_point(snap, gamma, p, opts, warm.as_ref())?;
        let w_opt = if opts.with_unperturbed {
            let (w, _, _) = solve_point(snap, 0.0, p, opts, Some(&w_star))?;
            Some(w)
        } else {
            None
        };
        warm = Some(w_star.clone());
        out.push(OracleSolution {
            w_star,
            w_opt,
            akkt_residual: akkt_res,
            method,
        });
    }
    Ok(out)
}

/// Largest per-step movement of the stationary point along an oracle
/// trajectory, per block.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DriftEstimate {
    pub drift_x: f64,
    pub drift_y: f64,
    pub drift_lambda: f64,
}

/// Measures per-block stationary-point drifts
/// `max_k ||x*(k+1) - x*(k)||` (and likewise for `y`, `lambda`) from an
/// oracle trajectory of length at least 2.
pub fn measure_drifts(oracle_traj: &[OracleSolution]) -> Result<DriftEstimate, CoreError> {
    if oracle_traj.len() < 2 {
        return Err(CoreError::Invalid {
            what: "oracle trajectory",
            detail: String::from("drift measurement needs at least two solutions"),
        });
    }
    let mut d = DriftEstimate {
        drift_x: 0.0,
        drift_y: 0.0,
        drift_lambda: 0.0,
    };
    for pair in oracle_traj.windows(2) {
        let (a, b) = (&pair[0].w_star, &pair[1].w_star);
        d.drift_x = d.drift_x.max((&b.x - &a.x).norm());
        d.drift_y = d.drift_y.max((&b.y - &a.y).norm());
        d.drift_lambda = d.drift_lambda.max((&b.lambda - &a.lambda).norm());
    }
    Ok(d)
}

/// Asymptotic tracking bound in the weighted norm. Returns
/// `(bound, per_step_term)` where
/// `per_step_term = sqrt(drift_x^2/alpha1 + drift_y^2/alpha2 + 2*drift_lambda^2)`
/// is the additive stationary-point movement per step and
/// `bound = per_step_term / delta` its geometric accumulation.
pub fn tracking_bound(p: &SolverParams, drifts: &DriftEstimate) -> Result<(f64, f64), CoreError> {
    if p.delta <= 0.0 || p.delta.is_nan() {
        return Err(CoreError::Invalid {
            what: "tracking bound",
            detail: String::from("requires a positive contraction constant"),
        });
    }
    let psi = libm::sqrt(
        drifts.drift_x * drifts.drift_x / p.alpha1
            + drifts.drift_y * drifts.drift_y / p.alpha2
            + 2.0 * drifts.drift_lambda * drifts.drift_lambda,
    );
    Ok((psi / p.delta, psi))
}

/// A-priori bound on the per-step dual stationary-point movement from raw
/// problem-data drifts:
/// `sigma_a*drift_x + sigma_b*drift_y + drift_rhs
///  + drift_a*j(s1) + drift_b*j(s2)` with `j(s) = s + sqrt(gamma)*M*c`,
/// where `(s1, s2)` are the primal stationary-norm bounds and `M` the dual
/// one. `c_estimate` is a caller-supplied constant (not derivable from
/// problem data); it is irrelevant when the coupling matrices do not drift
/// or when `gamma = 0`.
pub fn predicted_sigma_lambda(
    bounds: &BoundsProfile,
    gamma: f64,
    c_estimate: f64,
) -> Result<f64, CoreError> {
    bounds.validate()?;
    if !(gamma.is_finite() && gamma >= 0.0) {
        return Err(CoreError::Invalid {
            what: "predicted dual drift",
            detail: String::from("gamma must be finite and nonnegative"),
        });
    }
    if !(c_estimate.is_finite() && c_estimate >= 0.0) {
        return Err(CoreError::Invalid {
            what: "predicted dual drift",
            detail: String::from("c_estimate must be finite and nonnegative"),
        });
    }
    let base = bounds.sigma_a * bounds.drift_x + bounds.sigma_b * bounds.drift_y + bounds.drift_rhs;
    if bounds.drift_a == 0.0 && bounds.drift_b == 0.0 {
        return Ok(base);
    }
    let (s1, s2) = bounds.primal_bounds.ok_or_else(|| CoreError::Invalid {
        what: "predicted dual drift",
        detail: String::from("primal_bounds must be set when coupling matrices drift"),
    })?;
    let kick = if gamma > 0.0 {
        let m = bounds.dual_bound.ok_or_else(|| CoreError::Invalid {
            what: "predicted dual drift",
            detail: String::from(
                "dual_bound must be set when coupling matrices drift and gamma > 0",
            ),
        })?;
        libm::sqrt(gamma) * m * c_estimate
    } else {
        0.0
    };
    Ok(base + bounds.drift_a * (s1 + kick) + bounds.drift_b * (s2 + kick))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::atoms::{Atom, SeparableFunction};
    use crate::params::GMetric;
    use alloc::vec;
    use nalgebra::{dmatrix, dvector};

    fn half_norm_sq(dim: usize) -> SeparableFunction {
        SeparableFunction::quadratic(DMatrix::identity(dim, dim), DVector::zeros(dim), 0.0)
            .unwrap()
    }

    /// Scalar coupled problem: f = half x^2, g = half y^2, x + y = b.
    fn coupled_snapshot(time_index: u64, b: f64) -> ProblemSnapshot {
        ProblemSnapshot::new(
            time_index,
            half_norm_sq(1),
            SeparableFunction::zero(1),
            half_norm_sq(1),
            SeparableFunction::zero(1),
            dmatrix![1.0],
            dmatrix![1.0],
            dvector![b],
        )
        .unwrap()
    }

    fn default_params() -> SolverParams {
        SolverParams::new(0.4, 2.0 / 3.0, 0.5, 1.0, 1.0 / 3.0).unwrap()
    }

    #[test]
    fn scalar_stationary_point_matches_closed_form() {
        let sol = solve_akkt(&coupled_snapshot(0, 2.0), 1.0, &default_params()).unwrap();
        assert_eq!(sol.method, OracleMethod::LinearSolve);
        assert!(sol.akkt_residual <= LINEAR_SOLVE_TOLERANCE);
        for v in [&sol.w_star.x[0], &sol.w_star.y[0], &sol.w_star.lambda[0]] {
            assert!((v - 2.0 / 3.0).abs() < 1e-12);
        }
    }

    #[test]
    fn homogeneous_problem_has_zero_stationary_point() {
        let sol = solve_akkt(&coupled_snapshot(0, 0.0), 1.0, &default_params()).unwrap();
        assert_eq!(sol.w_star.x, dvector![0.0]);
        assert_eq!(sol.w_star.y, dvector![0.0]);
        assert_eq!(sol.w_star.lambda, dvector![0.0]);
    }

    #[test]
    fn two_by_two_instance_matches_rational_solution() {
        let snap = ProblemSnapshot::new(
            0,
            SeparableFunction::quadratic(dmatrix![2.0, 1.0; 1.0, 3.0], dvector![1.0, -1.0], 0.0)
                .unwrap(),
            SeparableFunction::zero(2),
            SeparableFunction::quadratic(dmatrix![1.0, 0.0; 0.0, 2.0], dvector![0.0, 1.0], 0.0)
                .unwrap(),
            SeparableFunction::zero(2),
            dmatrix![1.0, 2.0],
            dmatrix![3.0, -1.0],
            dvector![4.0],
        )
        .unwrap();
        let sol = solve_akkt(&snap, 0.5, &default_params()).unwrap();
        // exact rational solution: x = (-85/114, 29/38), y = (31/38, -145/228),
        // lambda = 31/114
        let expect_x = [-0.745_614_035_087_719_3, 0.763_157_894_736_842_1];
        let expect_y = [0.815_789_473_684_210_5, -0.635_964_912_280_701_7];
        for i in 0..2 {
            assert!((sol.w_star.x[i] - expect_x[i]).abs() < 1e-12);
            assert!((sol.w_star.y[i] - expect_y[i]).abs() < 1e-12);
        }
        assert!((sol.w_star.lambda[0] - 0.271_929_824_561_403_5).abs() < 1e-12);
        assert!(sol.akkt_residual <= 1e-12);
    }

    #[test]
    fn shrinking_perturbation_walks_to_the_unperturbed_point() {
        let snap = coupled_snapshot(0, 2.0);
        let p = default_params();
        let opts = OracleOptions {
            with_unperturbed: true,
            ..OracleOptions::default()
        };
        let mut last_dist = f64::INFINITY;
        for k in 0..=10 {
            let gamma = libm::pow(2.0, -(k as f64));
            let sol = solve_akkt_with(&snap, gamma, &p, &opts).unwrap();
            let closed_form = 2.0 / (2.0 + gamma);
            assert!((sol.w_star.x[0] - closed_form).abs() < 1e-12);
            let opt = sol.w_opt.as_ref().unwrap();
            assert!((opt.x[0] - 1.0).abs() < 1e-12);
            assert!((opt.y[0] - 1.0).abs() < 1e-12);
            assert!((opt.lambda[0] - 1.0).abs() < 1e-12);
            let dist = libm::sqrt(
                (&sol.w_star.x - &opt.x).norm_squared() + (&sol.w_star.y - &opt.y).norm_squared(),
            );
            assert!(dist <= last_dist + 1e-12);
            assert!(sol.w_star.lambda.norm() <= opt.lambda.norm() + 1e-10);
            last_dist = dist;
        }
    }

    #[test]
    fn residual_at_origin_equals_constraint_gap() {
        let snap = coupled_snapshot(0, 2.0);
        let w = SolverState::zeros(1, 1, 1);
        let res = akkt_residual(&snap, &w, 1.0, &default_params()).unwrap();
        assert_eq!(res, 2.0);
    }

    #[test]
    fn residual_ignores_zero_atom_partitioning() {
        let base = ProblemSnapshot::new(
            0,
            half_norm_sq(2),
            SeparableFunction::zero(2),
            half_norm_sq(2),
            SeparableFunction::zero(2),
            dmatrix![1.0, 0.0; 0.0, 1.0],
            dmatrix![1.0, 0.0; 0.0, 1.0],
            dvector![1.0, -2.0],
        )
        .unwrap();
        let split = ProblemSnapshot::new(
            0,
            half_norm_sq(2),
            SeparableFunction::new(2, vec![(0..1, Atom::Zero), (1..2, Atom::Zero)]).unwrap(),
            half_norm_sq(2),
            SeparableFunction::zero(2),
            dmatrix![1.0, 0.0; 0.0, 1.0],
            dmatrix![1.0, 0.0; 0.0, 1.0],
            dvector![1.0, -2.0],
        )
        .unwrap();
        let w = SolverState::new(dvector![0.3, -0.7], dvector![0.1, 0.2], dvector![1.0, -1.0], 0);
        let p = default_params();
        assert_eq!(
            akkt_residual(&base, &w, 0.25, &p).unwrap(),
            akkt_residual(&split, &w, 0.25, &p).unwrap()
        );
    }

    #[test]
    fn forced_fixed_point_agrees_with_direct_solve() {
        let snap = coupled_snapshot(0, 2.0);
        let p = default_params();
        let direct = solve_akkt(&snap, 1.0, &p).unwrap();
        let iterated = solve_akkt_with(
            &snap,
            1.0,
            &p,
            &OracleOptions {
                force_method: Some(OracleMethod::FixedPointIteration),
                ..OracleOptions::default()
            },
        )
        .unwrap();
        assert_eq!(iterated.method, OracleMethod::FixedPointIteration);
        let g = GMetric::from_params(&p);
        let diff = g.norm(
            &(&direct.w_star.x - &iterated.w_star.x),
            &(&direct.w_star.y - &iterated.w_star.y),
            &(&direct.w_star.lambda - &iterated.w_star.lambda),
        );
        assert!(diff <= 1e-6, "disagreement {diff:e}");
    }

    #[test]
    fn forcing_direct_solve_on_nonsmooth_problems_fails() {
        let snap = ProblemSnapshot::new(
            0,
            half_norm_sq(1),
            SeparableFunction::new(1, vec![(0..1, Atom::weighted_l1(dvector![1.0]).unwrap())])
                .unwrap(),
            half_norm_sq(1),
            SeparableFunction::zero(1),
            dmatrix![1.0],
            dmatrix![1.0],
            dvector![2.0],
        )
        .unwrap();
        let err = solve_akkt_with(
            &snap,
            1.0,
            &default_params(),
            &OracleOptions {
                force_method: Some(OracleMethod::LinearSolve),
                ..OracleOptions::default()
            },
        );
        assert!(matches!(err, Err(CoreError::NotSmooth { .. })));
    }

    #[test]
    fn tight_iteration_caps_surface_the_best_residual() {
        let snap = coupled_snapshot(0, 2.0);
        let err = solve_akkt_with(
            &snap,
            1.0,
            &default_params(),
            &OracleOptions {
                force_method: Some(OracleMethod::FixedPointIteration),
                max_iterations: 2,
                tolerance: Some(1e-14),
                ..OracleOptions::default()
            },
        );
        match err {
            Err(CoreError::IterationCap { best_residual }) => {
                assert!(best_residual.is_finite() && best_residual > 0.0)
            }
            other => panic!("expected iteration cap, got {other:?}"),
        }
    }

    #[test]
    fn degenerate_unperturbed_system_reports_singularity() {
        let snap = ProblemSnapshot::new(
            0,
            half_norm_sq(1),
            SeparableFunction::zero(1),
            half_norm_sq(1),
            SeparableFunction::zero(1),
            dmatrix![0.0],
            dmatrix![0.0],
            dvector![0.0],
        )
        .unwrap();
        let p = default_params();
        assert!(matches!(
            solve_akkt(&snap, 0.0, &p),
            Err(CoreError::SingularSystem)
        ));
        assert!(solve_akkt(&snap, 0.5, &p).is_ok());
    }

    #[test]
    fn oracle_trajectory_tracks_moving_data() {
        let snaps: Vec<_> = (0..5)
            .map(|k| coupled_snapshot(k, 2.0 + 0.1 * k as f64))
            .collect();
        let p = default_params();
        let sols = solve_akkt_trajectory(&snaps, 1.0, &p, &OracleOptions::default()).unwrap();
        assert_eq!(sols.len(), 5);
        for (k, sol) in sols.iter().enumerate() {
            let b = 2.0 + 0.1 * k as f64;
            assert!((sol.w_star.x[0] - b / 3.0).abs() < 1e-12);
        }
    }

    #[test]
    fn drift_measurement_matches_closed_form_motion() {
        let p = default_params();
        let snaps = [coupled_snapshot(0, 2.0), coupled_snapshot(1, 2.1)];
        let sols = solve_akkt_trajectory(&snaps, 1.0, &p, &OracleOptions::default()).unwrap();
        let d = measure_drifts(&sols).unwrap();
        assert!((d.drift_x - 0.1 / 3.0).abs() < 1e-12);
        assert!((d.drift_y - 0.1 / 3.0).abs() < 1e-12);
        assert!((d.drift_lambda - 0.1 / 3.0).abs() < 1e-12);

        let constant = solve_akkt_trajectory(
            &[coupled_snapshot(0, 2.0), coupled_snapshot(1, 2.0)],
            1.0,
            &p,
            &OracleOptions::default(),
        )
        .unwrap();
        let d0 = measure_drifts(&constant).unwrap();
        assert_eq!((d0.drift_x, d0.drift_y, d0.drift_lambda), (0.0, 0.0, 0.0));

        assert!(measure_drifts(&sols[..1]).is_err());
    }

    #[test]
    fn tracking_bound_hand_values() {
        let p = SolverParams::new(1.0, 1.0, 0.5, 1.0, 1.0 / 3.0).unwrap();
        let (bound, psi) = tracking_bound(
            &p,
            &DriftEstimate {
                drift_x: 1.0,
                drift_y: 1.0,
                drift_lambda: 1.0,
            },
        )
        .unwrap();
        assert_eq!(psi, 2.0);
        assert_eq!(bound, 6.0);

        let zero = tracking_bound(
            &p,
            &DriftEstimate {
                drift_x: 0.0,
                drift_y: 0.0,
                drift_lambda: 0.0,
            },
        )
        .unwrap();
        assert_eq!(zero, (0.0, 0.0));
    }

    #[test]
    fn tracking_bound_generic_value_and_homogeneity() {
        let p = SolverParams::new(0.4, 2.0 / 3.0, 0.5, 1.0, 1.0 / 3.0).unwrap();
        let d = DriftEstimate {
            drift_x: 0.2,
            drift_y: 0.1,
            drift_lambda: 0.05,
        };
        let (bound, _) = tracking_bound(&p, &d).unwrap();
        let expected = 1.0392304845413265;
        assert!((bound - expected).abs() <= 1e-14 * expected);

        let doubled = DriftEstimate {
            drift_x: 0.4,
            drift_y: 0.2,
            drift_lambda: 0.1,
        };
        let (bound2, _) = tracking_bound(&p, &doubled).unwrap();
        assert!((bound2 - 2.0 * bound).abs() <= 1e-14 * bound2);
    }

    #[test]
    fn predicted_dual_drift_hand_values() {
        let mut bounds = BoundsProfile::new(1.0, 1.0, 1.0, 1.0, 1.0, 1.0);
        bounds.drift_x = 0.1;
        bounds.drift_y = 0.1;
        bounds.drift_rhs = 0.05;
        assert_eq!(predicted_sigma_lambda(&bounds, 0.5, 123.0).unwrap(), 0.25);

        bounds.drift_a = 0.02;
        bounds.drift_b = 0.03;
        bounds.primal_bounds = Some((0.1, 0.1));
        bounds.dual_bound = Some(2.0);
        let v = predicted_sigma_lambda(&bounds, 0.5, 1.5).unwrap();
        let expected = 0.36106601717798215;
        assert!((v - expected).abs() <= 1e-15 * expected);

        // zero perturbation drops the dual kick and needs no dual bound
        bounds.dual_bound = None;
        let v0 = predicted_sigma_lambda(&bounds, 0.0, 1.5).unwrap();
        assert!((v0 - 0.255).abs() < 1e-15);

        // drifting coupling matrices without primal bounds is an error
        bounds.primal_bounds = None;
        assert!(predicted_sigma_lambda(&bounds, 0.0, 1.5).is_err());
    }
}
