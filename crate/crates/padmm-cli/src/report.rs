//! Machine-readable run report. One report per scenario run; the pass/fail
//! flags are true iff the corresponding inequality held at every recorded
//! step within the configured tolerance.

use serde::Serialize;

/// Full outcome of one scenario run.
#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    /// Scenario label (config `id` or the config file stem).
    pub scenario: String,
    /// Problem source: `snapshots`, `drifting_qp`, `opf`, or `toy`.
    pub kind: String,
    /// Solver parameters actually used (absent for the toy recursion,
    /// which runs its own iteration).
    pub params: Option<ParamsUsed>,
    pub iters_per_step: usize,
    /// Seed the run resolved to, when a generator was involved.
    pub seed: Option<u64>,
    /// Per-recorded-step diagnostics (empty for toy runs).
    pub steps: Vec<StepReport>,
    pub summary: Summary,
    pub wall_clock_seconds: f64,
}

/// Parameters after auto-selection, plus the guaranteed contraction rate
/// `(1 + delta)^(-1/2)` they imply.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct ParamsUsed {
    pub alpha1: f64,
    pub alpha2: f64,
    pub beta: f64,
    pub gamma: f64,
    pub delta: f64,
    pub contraction_rate: f64,
}

/// Diagnostics for one recorded step.
#[derive(Debug, Clone, Serialize)]
pub struct StepReport {
    pub k: usize,
    /// Weighted-norm distance to the stationary-point oracle.
    pub g_err: f64,
    /// `g_err / (previous g_err + oracle drift)`; absent when the
    /// denominator sits below the configured floor.
    pub contraction_ratio: Option<f64>,
    /// Right-hand side of the per-step recursion inequality:
    /// `rate^iters * (previous g_err + oracle drift) + slack`.
    pub bound_rhs: f64,
    /// Stationarity residual of the iterate on its snapshot.
    pub akkt_res: f64,
    /// Constraint residual norm of the iterate.
    pub primal_res: f64,
}

/// Aggregate checks over the whole run.
#[derive(Debug, Clone, Serialize)]
pub struct Summary {
    /// Largest recorded contraction ratio (above-floor steps only).
    pub max_contraction_ratio: Option<f64>,
    /// Max `g_err` over the trailing window.
    pub steady_state_g_err: Option<f64>,
    /// Drift-based steady-state ceiling `psi / delta` from oracle-measured
    /// drifts; absent when the oracle trajectory shows no drift.
    pub tracking_bound: Option<f64>,
    /// Final-step distance between the perturbed and unperturbed primal
    /// solutions, when the unperturbed comparison was requested.
    pub v_gap: Option<f64>,
    pub lambda_star_norm: Option<f64>,
    pub lambda_opt_norm: Option<f64>,
    /// Every above-floor ratio was at most `rate + slack`.
    pub contraction_ok: bool,
    /// The per-step recursion inequality held at every step.
    pub recursion_ok: bool,
    /// Steady-state error stayed at or below the drift ceiling (vacuously
    /// true when no drift was measured).
    pub tracking_ok: bool,
    /// Dual iterate norms stayed within their initial-error budget
    /// (checked on static runs).
    pub dual_bound_ok: bool,
    pub diverged: bool,
    pub divergence_expected: bool,
    /// Conjunction of the check flags, with divergence honored per
    /// `divergence_expected`.
    pub all_ok: bool,
    /// Present only for toy runs.
    pub toy: Option<ToySummary>,
}

/// Outcome of the bilinear toy recursion.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct ToySummary {
    pub perturbed: bool,
    pub initial_norm: f64,
    pub final_norm: f64,
    /// `final_norm / initial_norm`.
    pub growth_ratio: f64,
    pub truncated: bool,
}

impl Summary {
    /// A summary with all checks vacuously passing; callers switch
    /// individual fields as they measure them.
    pub fn passing() -> Self {
        Summary {
            max_contraction_ratio: None,
            steady_state_g_err: None,
            tracking_bound: None,
            v_gap: None,
            lambda_star_norm: None,
            lambda_opt_norm: None,
            contraction_ok: true,
            recursion_ok: true,
            tracking_ok: true,
            dual_bound_ok: true,
            diverged: false,
            divergence_expected: false,
            all_ok: true,
            toy: None,
        }
    }

    /// Recomputes `all_ok` from the individual flags: every inequality check
    /// passed, and the run either did not diverge or was expected to.
    pub fn finalize(&mut self) {
        let divergence_accounted = !self.diverged || self.divergence_expected;
        self.all_ok = self.contraction_ok
            && self.recursion_ok
            && self.tracking_ok
            && self.dual_bound_ok
            && divergence_accounted;
    }
}
