//! The online damped proximal splitting iteration and its run drivers.
//!
//! Each step applies, in order: a proximal gradient update of `y` against the
//! smooth part of the augmented Lagrangian, the same for `x` using the fresh
//! `y`, and a damped dual update
//! `lambda <- (1-beta*gamma)*lambda - beta*(A x + B y - b)`.

use alloc::vec::Vec;

use nalgebra::DVector;

use crate::params::{GMetric, SolverParams};
use crate::problem::ProblemSnapshot;
use crate::CoreError;

/// G-norm level past which a run is declared divergent.
pub const DIVERGENCE_G_NORM: f64 = 1e12;

/// One primal-dual iterate, tagged with the time index of the snapshot it
/// was produced from (`-1` before any snapshot is applied).
#[derive(Debug, Clone, PartialEq)]
pub struct SolverState {
    pub x: DVector<f64>,
    pub y: DVector<f64>,
    pub lambda: DVector<f64>,
    pub time_index: i64,
}

impl SolverState {
    pub fn new(x: DVector<f64>, y: DVector<f64>, lambda: DVector<f64>, time_index: i64) -> Self {
        Self {
            x,
            y,
            lambda,
            time_index,
        }
    }

    /// All-zero starting state, time-indexed before the first snapshot.
    pub fn zeros(dim_x: usize, dim_y: usize, dim_constraints: usize) -> Self {
        Self {
            x: DVector::zeros(dim_x),
            y: DVector::zeros(dim_y),
            lambda: DVector::zeros(dim_constraints),
            time_index: -1,
        }
    }

    pub fn is_finite(&self) -> bool {
        self.x.iter().all(|v| v.is_finite())
            && self.y.iter().all(|v| v.is_finite())
            && self.lambda.iter().all(|v| v.is_finite())
    }
}

fn check_state_dims(snap: &ProblemSnapshot, s: &SolverState) -> Result<(), CoreError> {
    if s.x.len() != snap.dim_x() {
        return Err(CoreError::DimensionMismatch {
            what: "state x",
            expected: snap.dim_x(),
            got: s.x.len(),
        });
    }
    if s.y.len() != snap.dim_y() {
        return Err(CoreError::DimensionMismatch {
            what: "state y",
            expected: snap.dim_y(),
            got: s.y.len(),
        });
    }
    if s.lambda.len() != snap.dim_constraints() {
        return Err(CoreError::DimensionMismatch {
            what: "state lambda",
            expected: snap.dim_constraints(),
            got: s.lambda.len(),
        });
    }
    Ok(())
}

/// Smooth part of the perturbed augmented Lagrangian:
/// `f1(x) + g1(y) + (beta/2)*||A x + B y - b||^2
///  - (1-beta*gamma)*lambda'(A x + B y - b)`.
pub fn smooth_lagrangian(
    snap: &ProblemSnapshot,
    x: &DVector<f64>,
    y: &DVector<f64>,
    lambda: &DVector<f64>,
    p: &SolverParams,
) -> f64 {
    let r = snap.constraint_residual(x, y);
    snap.f1().eval(x) + snap.g1().eval(y) + 0.5 * p.beta * r.norm_squared()
        - (1.0 - p.beta * p.gamma) * lambda.dot(&r)
}

/// Full perturbed augmented Lagrangian (smooth part plus the prox-friendly
/// costs); extended-real, `+inf` when an indicator atom is violated.
pub fn lagrangian_value(snap: &ProblemSnapshot, s: &SolverState, p: &SolverParams) -> f64 {
    smooth_lagrangian(snap, &s.x, &s.y, &s.lambda, p)
        + snap.f0().eval(&s.x)
        + snap.g0().eval(&s.y)
}

/// Gradient of [`smooth_lagrangian`] in `y`:
/// `grad g1(y) + B'(beta*(A x + B y - b) - (1-beta*gamma)*lambda)`.
pub fn smooth_lagrangian_grad_y(
    snap: &ProblemSnapshot,
    x: &DVector<f64>,
    y: &DVector<f64>,
    lambda: &DVector<f64>,
    p: &SolverParams,
) -> Result<DVector<f64>, CoreError> {
    check_state_dims(
        snap,
        &SolverState::new(x.clone(), y.clone(), lambda.clone(), 0),
    )?;
    let r = snap.constraint_residual(x, y);
    let pull = r * p.beta - lambda * (1.0 - p.beta * p.gamma);
    Ok(snap.g1().grad(y)? + snap.b().tr_mul(&pull))
}

/// Gradient of [`smooth_lagrangian`] in `x`:
/// `grad f1(x) + A'(beta*(A x + B y - b) - (1-beta*gamma)*lambda)`.
pub fn smooth_lagrangian_grad_x(
    snap: &ProblemSnapshot,
    x: &DVector<f64>,
    y: &DVector<f64>,
    lambda: &DVector<f64>,
    p: &SolverParams,
) -> Result<DVector<f64>, CoreError> {
    check_state_dims(
        snap,
        &SolverState::new(x.clone(), y.clone(), lambda.clone(), 0),
    )?;
    let r = snap.constraint_residual(x, y);
    let pull = r * p.beta - lambda * (1.0 - p.beta * p.gamma);
    Ok(snap.f1().grad(x)? + snap.a().tr_mul(&pull))
}

/// One full iteration against the given snapshot: proximal gradient in `y`,
/// then in `x` (using the fresh `y`), then the damped dual update. The
/// snapshot's time index must equal the state's (repeated static iteration)
/// or follow it by one (online advance).
pub fn step(
    snap: &ProblemSnapshot,
    s: &SolverState,
    p: &SolverParams,
) -> Result<SolverState, CoreError> {
    check_state_dims(snap, s)?;
    let snap_k = snap.time_index() as i64;
    if snap_k != s.time_index && snap_k != s.time_index + 1 {
        return Err(CoreError::TimeIndexMismatch {
            snapshot: snap.time_index(),
            state: s.time_index,
        });
    }

    let gy = smooth_lagrangian_grad_y(snap, &s.x, &s.y, &s.lambda, p)?;
    let y_next = snap.g0().prox(&(&s.y - gy * p.alpha2), p.alpha2)?;

    let gx = smooth_lagrangian_grad_x(snap, &s.x, &y_next, &s.lambda, p)?;
    let x_next = snap.f0().prox(&(&s.x - gx * p.alpha1), p.alpha1)?;

    let r = snap.constraint_residual(&x_next, &y_next);
    let lambda_next = &s.lambda * (1.0 - p.beta * p.gamma) - r * p.beta;

    let out = SolverState::new(x_next, y_next, lambda_next, snap_k);
    if !out.is_finite() {
        return Err(CoreError::NonFinite { what: "iterate" });
    }
    Ok(out)
}

/// State recorded after the final iteration on one snapshot, along with
/// cheap diagnostics that need no oracle.
#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord {
    pub state: SolverState,
    /// `||A x + B y - b||` at the recorded state.
    pub primal_residual: f64,
    /// Full perturbed augmented Lagrangian at the recorded state.
    pub lagrangian: f64,
}

impl StepRecord {
    fn measure(snap: &ProblemSnapshot, state: SolverState, p: &SolverParams) -> Self {
        let primal_residual = snap.constraint_residual(&state.x, &state.y).norm();
        let lagrangian = lagrangian_value(snap, &state, p);
        Self {
            state,
            primal_residual,
            lagrangian,
        }
    }
}

/// Recorded iterate sequence, one record per applied snapshot (online runs)
/// or per iteration (static runs).
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Trajectory {
    pub records: Vec<StepRecord>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn final_state(&self) -> Option<&SolverState> {
        self.records.last().map(|r| &r.state)
    }

    pub fn states(&self) -> impl Iterator<Item = &SolverState> {
        self.records.iter().map(|r| &r.state)
    }
}

/// A run aborted by divergence or invalid data, carrying the snapshot index
/// where it failed and everything recorded before that.
#[derive(Debug, Clone)]
pub struct RunFailure {
    pub error: CoreError,
    pub at_snapshot: usize,
    pub partial: Trajectory,
}

fn diverged(metric: &GMetric, s: &SolverState) -> Option<CoreError> {
    let gn = metric.norm(&s.x, &s.y, &s.lambda);
    if !gn.is_finite() || gn > DIVERGENCE_G_NORM {
        Some(CoreError::Diverged { g_norm: gn })
    } else {
        None
    }
}

/// Runs the online iteration over a snapshot sequence, applying
/// `iters_per_step` iterations per snapshot (1 = the fully online regime)
/// and recording the state reached on each snapshot. Deterministic in its
/// inputs; aborts with a [`RunFailure`] on divergence.
pub fn run_online(
    snaps: &[ProblemSnapshot],
    p: &SolverParams,
    w0: &SolverState,
    iters_per_step: usize,
) -> Result<Trajectory, RunFailure> {
    let fail = |error, at_snapshot, records| {
        Err(RunFailure {
            error,
            at_snapshot,
            partial: Trajectory { records },
        })
    };
    if iters_per_step == 0 {
        return fail(
            CoreError::Invalid {
                what: "iters_per_step",
                detail: alloc::string::String::from("must be at least 1"),
            },
            0,
            Vec::new(),
        );
    }
    let metric = GMetric::from_params(p);
    let mut state = w0.clone();
    let mut records = Vec::with_capacity(snaps.len());
    for (idx, snap) in snaps.iter().enumerate() {
        for _ in 0..iters_per_step {
            state = match step(snap, &state, p) {
                Ok(next) => next,
                Err(e) => return fail(e, idx, records),
            };
            if let Some(e) = diverged(&metric, &state) {
                return fail(e, idx, records);
            }
        }
        records.push(StepRecord::measure(snap, state.clone(), p));
    }
    Ok(Trajectory { records })
}

/// Iterates on a single fixed snapshot, recording every iterate. Equivalent
/// to an online run over `iters` copies of the snapshot, without cloning it.
pub fn run_static(
    snap: &ProblemSnapshot,
    p: &SolverParams,
    w0: &SolverState,
    iters: usize,
) -> Result<Trajectory, RunFailure> {
    let metric = GMetric::from_params(p);
    let mut state = w0.clone();
    let mut records = Vec::with_capacity(iters);
    for idx in 0..iters {
        state = match step(snap, &state, p) {
            Ok(next) => next,
            Err(e) => {
                return Err(RunFailure {
                    error: e,
                    at_snapshot: idx,
                    partial: Trajectory { records },
                })
            }
        };
        if let Some(e) = diverged(&metric, &state) {
            return Err(RunFailure {
                error: e,
                at_snapshot: idx,
                partial: Trajectory { records },
            });
        }
        records.push(StepRecord::measure(snap, state.clone(), p));
    }
    Ok(Trajectory { records })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::atoms::{Atom, SeparableFunction};
    use alloc::vec;
    use nalgebra::{dmatrix, dvector, DMatrix};

    fn half_norm_sq(dim: usize) -> SeparableFunction {
        SeparableFunction::quadratic(DMatrix::identity(dim, dim), DVector::zeros(dim), 0.0)
            .unwrap()
    }

    /// f = g = half squared norm, A = I, B = -I, b = 0 (origin is stationary).
    fn mirror_snapshot() -> ProblemSnapshot {
        ProblemSnapshot::new(
            0,
            half_norm_sq(1),
            SeparableFunction::zero(1),
            half_norm_sq(1),
            SeparableFunction::zero(1),
            dmatrix![1.0],
            dmatrix![-1.0],
            dvector![0.0],
        )
        .unwrap()
    }

    /// Scalar coupled problem: f = half x^2, g = half y^2, x + y = 2.
    fn coupled_snapshot(time_index: u64) -> ProblemSnapshot {
        ProblemSnapshot::new(
            time_index,
            half_norm_sq(1),
            SeparableFunction::zero(1),
            half_norm_sq(1),
            SeparableFunction::zero(1),
            dmatrix![1.0],
            dmatrix![1.0],
            dvector![2.0],
        )
        .unwrap()
    }

    fn default_params() -> SolverParams {
        SolverParams::new(0.4, 2.0 / 3.0, 0.5, 1.0, 1.0 / 3.0).unwrap()
    }

    #[test]
    fn lagrangian_vanishes_at_origin_of_homogeneous_problem() {
        let snap = mirror_snapshot();
        let s = SolverState::zeros(1, 1, 1);
        assert_eq!(lagrangian_value(&snap, &s, &default_params()), 0.0);
    }

    #[test]
    fn lagrangian_hand_value() {
        let snap = mirror_snapshot();
        let s = SolverState::new(dvector![1.0], dvector![0.0], dvector![0.0], 0);
        assert_eq!(lagrangian_value(&snap, &s, &default_params()), 0.75);
    }

    #[test]
    fn lagrangian_is_infinite_outside_indicator_support() {
        let snap = ProblemSnapshot::new(
            0,
            half_norm_sq(1),
            SeparableFunction::new(
                1,
                vec![(0..1, Atom::box_indicator(dvector![0.0], dvector![1.0]).unwrap())],
            )
            .unwrap(),
            half_norm_sq(1),
            SeparableFunction::zero(1),
            dmatrix![1.0],
            dmatrix![-1.0],
            dvector![0.0],
        )
        .unwrap();
        let s = SolverState::new(dvector![2.0], dvector![0.0], dvector![0.0], 0);
        assert_eq!(lagrangian_value(&snap, &s, &default_params()), f64::INFINITY);
    }

    #[test]
    fn y_gradient_hand_value() {
        let snap = mirror_snapshot();
        let g = smooth_lagrangian_grad_y(
            &snap,
            &dvector![1.0],
            &dvector![1.0],
            &dvector![2.0],
            &default_params(),
        )
        .unwrap();
        assert_eq!(g, dvector![2.0]);
    }

    #[test]
    fn x_gradient_reduces_to_cost_gradient_at_feasible_dual_free_points() {
        let snap = mirror_snapshot();
        let g = smooth_lagrangian_grad_x(
            &snap,
            &dvector![1.5],
            &dvector![1.5],
            &dvector![0.0],
            &default_params(),
        )
        .unwrap();
        assert_eq!(g, dvector![1.5]);
    }

    #[test]
    fn zero_cost_zero_coupling_gives_zero_gradient() {
        let snap = ProblemSnapshot::new(
            0,
            half_norm_sq(2),
            SeparableFunction::zero(2),
            SeparableFunction::zero(3),
            SeparableFunction::zero(3),
            dmatrix![0.0, 0.0; 0.0, 0.0],
            DMatrix::zeros(2, 3),
            dvector![0.0, 0.0],
        )
        .unwrap();
        let g = smooth_lagrangian_grad_y(
            &snap,
            &dvector![1.0, 2.0],
            &dvector![3.0, 4.0, 5.0],
            &dvector![1.0, -1.0],
            &default_params(),
        )
        .unwrap();
        assert_eq!(g, DVector::zeros(3));
    }

    #[test]
    fn origin_is_a_fixed_point_of_the_homogeneous_problem() {
        let snap = mirror_snapshot();
        let s = SolverState::zeros(1, 1, 1);
        let next = step(&snap, &s, &default_params()).unwrap();
        assert_eq!(next.x, dvector![0.0]);
        assert_eq!(next.y, dvector![0.0]);
        assert_eq!(next.lambda, dvector![0.0]);
        assert_eq!(next.time_index, 0);
    }

    #[test]
    fn first_two_steps_match_scalar_hand_execution() {
        let snap = coupled_snapshot(0);
        let p = default_params();
        let s1 = step(&snap, &SolverState::zeros(1, 1, 1), &p).unwrap();
        // exact rational evaluation: (4/15, 2/3, 8/15)
        assert!((s1.x[0] - 0.26666666666666666).abs() < 1e-15);
        assert!((s1.y[0] - 0.666_666_666_666_666_6).abs() < 1e-15);
        assert!((s1.lambda[0] - 0.533_333_333_333_333_3).abs() < 1e-15);

        let s2 = step(&snap, &s1, &p).unwrap();
        // exact rational evaluation: (104/225, 34/45, 148/225)
        assert!((s2.x[0] - 0.4622222222222222).abs() < 1e-15);
        assert!((s2.y[0] - 0.755_555_555_555_555_5).abs() < 1e-15);
        assert!((s2.lambda[0] - 0.657_777_777_777_777_8).abs() < 1e-15);
    }

    #[test]
    fn stationary_point_is_fixed_under_stepping() {
        // For the coupled scalar problem with gamma = 1 the stationary point
        // solves x = lambda, y = lambda, x + y + lambda = 2.
        let snap = coupled_snapshot(0);
        let p = default_params();
        let w = SolverState::new(
            dvector![2.0 / 3.0],
            dvector![2.0 / 3.0],
            dvector![2.0 / 3.0],
            0,
        );
        let next = step(&snap, &w, &p).unwrap();
        assert!((next.x[0] - w.x[0]).abs() < 1e-15);
        assert!((next.y[0] - w.y[0]).abs() < 1e-15);
        assert!((next.lambda[0] - w.lambda[0]).abs() < 1e-15);
    }

    #[test]
    fn step_rejects_time_regression_and_dimension_mismatch() {
        let snap = coupled_snapshot(5);
        let p = default_params();
        let s = SolverState::zeros(1, 1, 1); // time_index -1
        assert!(matches!(
            step(&snap, &s, &p),
            Err(CoreError::TimeIndexMismatch { .. })
        ));
        let bad = SolverState::zeros(2, 1, 1);
        assert!(matches!(
            step(&coupled_snapshot(0), &bad, &p),
            Err(CoreError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn online_run_records_one_state_per_snapshot_and_is_deterministic() {
        let snaps: Vec<_> = (0..10).map(coupled_snapshot).collect();
        let p = default_params();
        let w0 = SolverState::zeros(1, 1, 1);
        let t1 = run_online(&snaps, &p, &w0, 1).unwrap();
        let t2 = run_online(&snaps, &p, &w0, 1).unwrap();
        assert_eq!(t1.len(), 10);
        assert_eq!(t1, t2);
        let times: Vec<i64> = t1.states().map(|s| s.time_index).collect();
        assert_eq!(times, (0..10).collect::<Vec<i64>>());
    }

    #[test]
    fn multiple_iterations_per_snapshot_equal_repeated_static_stepping() {
        let snap = coupled_snapshot(0);
        let p = default_params();
        let w0 = SolverState::zeros(1, 1, 1);
        let online = run_online(core::slice::from_ref(&snap), &p, &w0, 3).unwrap();
        let static_run = run_static(&snap, &p, &w0, 3).unwrap();
        assert_eq!(online.final_state(), static_run.final_state());
        assert_eq!(online.len(), 1);
        assert_eq!(static_run.len(), 3);
    }

    #[test]
    fn oversized_steps_abort_with_partial_trajectory() {
        let snap = coupled_snapshot(0);
        // Step size far above the admissible window: the proximal gradient
        // map expands and the iterates blow up.
        let p = SolverParams {
            alpha1: 50.0,
            ..default_params()
        };
        let w0 = SolverState::new(dvector![1.0], dvector![0.0], dvector![0.0], -1);
        let failure = run_static(&snap, &p, &w0, 10_000).unwrap_err();
        assert!(matches!(
            failure.error,
            CoreError::Diverged { .. } | CoreError::NonFinite { .. }
        ));
        assert!(failure.at_snapshot < 10_000);
        assert_eq!(failure.partial.len(), failure.at_snapshot);
    }

    #[test]
    fn recorded_diagnostics_match_direct_evaluation() {
        let snap = coupled_snapshot(0);
        let p = default_params();
        let w0 = SolverState::zeros(1, 1, 1);
        let traj = run_static(&snap, &p, &w0, 5).unwrap();
        for rec in &traj.records {
            let expect_res = snap
                .constraint_residual(&rec.state.x, &rec.state.y)
                .norm();
            assert_eq!(rec.primal_residual, expect_res);
            assert_eq!(rec.lagrangian, lagrangian_value(&snap, &rec.state, &p));
        }
    }
}
