//! Scenario execution: materializes the config, runs the solver (or the toy
//! recursion), runs the stationary-point oracle alongside, evaluates the
//! per-step inequality checks, and writes the CSV/JSON artifacts.
//!
//! Artifacts per run directory:
//! - `trajectory.csv` — `k, g_err, primal_res, akkt_res, lambda_norm, lagrangian`
//! - `oracle.csv` — `k, x_star_norm, y_star_norm, lambda_star_norm, akkt_res,
//!   drift_x, drift_y, drift_lambda`
//! - `toy.csv` (toy runs) — `k, norm, objective`
//! - `opf_metrics.csv` (power runs) — `k, voltage_violation, power_violation,
//!   consensus_violation`
//! - `report.json` — the [`RunReport`]
//!
//! Exit codes: 0 all checks passed, 1 a check failed, 2 config/schema
//! violation, 3 divergence (partial CSVs retained), 4 oracle failure.

use std::path::{Path, PathBuf};
use std::time::Instant;

use padmm_core::scenario::{opf_metrics, toy_run, OpfConfig, ToyConfig};
use padmm_core::solver::{run_online, run_static, Trajectory};
use padmm_core::{
    akkt_residual, bounds_from_snapshots, manual_params, measure_drifts, select_params,
    solve_akkt_trajectory, tracking_bound, GMetric, OracleOptions, OracleSolution,
    ProblemSnapshot, SolverParams, SolverState,
};

use crate::config::{ChecksSpec, GeneratorSpec, Materialized, ScenarioConfig};
use crate::csvio::{fmt_float, write_csv, write_json};
use crate::report::{ParamsUsed, RunReport, StepReport, Summary, ToySummary};
use crate::{CliError, EXIT_CHECK_FAILED, EXIT_DIVERGENCE};

/// A finished run: the report plus the exit code the process should end with.
pub struct RunOutput {
    pub report: RunReport,
    pub exit_code: i32,
}

/// Loads, validates, runs, and writes artifacts for one scenario file.
pub fn run_from_path(
    config_path: &Path,
    out_dir: &Path,
    seed_override: Option<u64>,
) -> Result<RunOutput, CliError> {
    let text = std::fs::read_to_string(config_path)
        .map_err(|e| CliError::Schema(format!("cannot read {}: {e}", config_path.display())))?;
    let cfg = ScenarioConfig::parse(&text)?;
    let scenario_id = cfg.id.clone().unwrap_or_else(|| {
        config_path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| String::from("scenario"))
    });
    run_config(&cfg, &scenario_id, out_dir, seed_override)
}

/// Runs an already-parsed scenario config.
pub fn run_config(
    cfg: &ScenarioConfig,
    scenario_id: &str,
    out_dir: &Path,
    seed_override: Option<u64>,
) -> Result<RunOutput, CliError> {
    std::fs::create_dir_all(out_dir)?;
    let started = Instant::now();
    match cfg.materialize(seed_override)? {
        Materialized::Toy {
            cfg: toy_cfg,
            perturbed,
        } => run_toy(cfg, scenario_id, out_dir, &toy_cfg, perturbed, started),
        Materialized::Solver { snaps, kind, opf } => run_solver(
            cfg,
            scenario_id,
            out_dir,
            snaps,
            kind,
            opf.as_ref(),
            seed_override,
            started,
        ),
    }
}

fn run_toy(
    cfg: &ScenarioConfig,
    scenario_id: &str,
    out_dir: &Path,
    toy_cfg: &ToyConfig,
    perturbed: bool,
    started: Instant,
) -> Result<RunOutput, CliError> {
    let trace =
        toy_run(toy_cfg, perturbed).map_err(|e| CliError::Schema(format!("toy generator: {e}")))?;
    let rows: Vec<Vec<String>> = trace
        .steps
        .iter()
        .enumerate()
        .map(|(k, s)| vec![k.to_string(), fmt_float(s.norm), fmt_float(s.objective)])
        .collect();
    write_csv(&out_dir.join("toy.csv"), &["k", "norm", "objective"], &rows)?;

    let initial = trace.initial_norm();
    let final_norm = trace.final_norm();
    let mut summary = Summary::passing();
    summary.diverged = trace.diverged;
    summary.divergence_expected = cfg.checks.divergence_expected;
    summary.toy = Some(ToySummary {
        perturbed,
        initial_norm: initial,
        final_norm,
        growth_ratio: if initial > 0.0 {
            final_norm / initial
        } else {
            f64::NAN
        },
        truncated: trace.diverged,
    });
    summary.finalize();

    let exit_code = if trace.diverged && !cfg.checks.divergence_expected {
        EXIT_DIVERGENCE
    } else {
        0
    };
    let report = RunReport {
        scenario: scenario_id.to_string(),
        kind: String::from("toy"),
        params: None,
        iters_per_step: cfg.iters_per_step,
        seed: Some(toy_cfg.seed),
        steps: Vec::new(),
        summary,
        wall_clock_seconds: started.elapsed().as_secs_f64(),
    };
    write_json(&out_dir.join("report.json"), &report)?;
    Ok(RunOutput { report, exit_code })
}

fn resolve_params(
    cfg: &ScenarioConfig,
    snaps: &[ProblemSnapshot],
) -> Result<SolverParams, CliError> {
    let bounds = bounds_from_snapshots(snaps)
        .map_err(|e| CliError::Schema(format!("problem bounds: {e}")))?;
    let a1 = cfg.params.alpha1.resolve("params.alpha1")?;
    let a2 = cfg.params.alpha2.resolve("params.alpha2")?;
    let (beta, gamma) = (cfg.params.beta, cfg.params.gamma);
    match (a1, a2) {
        (None, None) => select_params(&bounds, beta, gamma)
            .map_err(|e| CliError::Schema(format!("step-size selection: {e}"))),
        (Some(a1), Some(a2)) => manual_params(&bounds, a1, a2, beta, gamma)
            .map_err(|e| CliError::Schema(format!("manual step sizes: {e}"))),
        _ => Err(CliError::Schema(String::from(
            "params.alpha1 and params.alpha2 must both be \"auto\" or both numeric",
        ))),
    }
}

struct OracleData {
    sols: Vec<OracleSolution>,
    /// Per-record index into `sols` (identity online, constant 0 static).
    index: Vec<usize>,
}

/// Per-record diagnostics shared by the report and the CSV writers.
struct Diagnostics {
    steps: Vec<StepReport>,
    lambda_norms: Vec<f64>,
    lagrangians: Vec<f64>,
    g_err_initial: f64,
    /// Contraction factor covered by one record (`rate` per iteration,
    /// compounded over `iters_per_step` in online mode).
    effective_rate: f64,
    /// Single-iteration rate `(1 + delta)^(-1/2)`.
    rate: f64,
}

#[allow(clippy::too_many_arguments)]
fn run_solver(
    cfg: &ScenarioConfig,
    scenario_id: &str,
    out_dir: &Path,
    snaps: Vec<ProblemSnapshot>,
    kind: &'static str,
    opf: Option<&OpfConfig>,
    seed_override: Option<u64>,
    started: Instant,
) -> Result<RunOutput, CliError> {
    let p = resolve_params(cfg, &snaps)?;
    let w0 = SolverState::zeros(
        snaps[0].dim_x(),
        snaps[0].dim_y(),
        snaps[0].dim_constraints(),
    );
    // A single snapshot runs the static stepper, which records every
    // iterate; online runs record one state per snapshot.
    let is_static = snaps.len() == 1;

    let run_result = if is_static {
        run_static(&snaps[0], &p, &w0, cfg.iters_per_step)
    } else {
        run_online(&snaps, &p, &w0, cfg.iters_per_step)
    };
    let (traj, diverged) = match run_result {
        Ok(t) => (t, false),
        Err(f) => (f.partial, true),
    };

    let opts = OracleOptions {
        tolerance: cfg.checks.oracle_tolerance,
        max_iterations: cfg.checks.oracle_iteration_cap,
        with_unperturbed: cfg.checks.compare_unperturbed,
        force_method: None,
    };
    // Solve only the snapshots the run reached, so a divergent prefix still
    // yields a usable partial oracle file.
    let reached = if is_static {
        1
    } else {
        traj.len().max(1).min(snaps.len())
    };
    let sols = solve_akkt_trajectory(&snaps[..reached], p.gamma, &p, &opts)
        .map_err(|e| CliError::Oracle(e.to_string()))?;
    let index: Vec<usize> = if is_static {
        vec![0; traj.len()]
    } else {
        (0..traj.len()).collect()
    };
    let oracle = OracleData { sols, index };

    let iters_per_record = if is_static { 1 } else { cfg.iters_per_step };
    let diag = diagnose(&snaps, &traj, &oracle, &p, &cfg.checks, is_static, iters_per_record, &w0)?;
    write_trajectory_csv(out_dir, &diag)?;
    write_oracle_csv(out_dir, &oracle)?;
    if let Some(opf_cfg) = opf {
        write_opf_metrics_csv(out_dir, &traj, opf_cfg)?;
    }

    let mut summary = build_summary(&diag, &oracle, &p, &cfg.checks, is_static);
    summary.diverged = diverged;
    summary.divergence_expected = cfg.checks.divergence_expected;
    summary.finalize();

    let report = RunReport {
        scenario: scenario_id.to_string(),
        kind: kind.to_string(),
        params: Some(ParamsUsed {
            alpha1: p.alpha1,
            alpha2: p.alpha2,
            beta: p.beta,
            gamma: p.gamma,
            delta: p.delta,
            contraction_rate: contraction_rate(&p),
        }),
        iters_per_step: cfg.iters_per_step,
        seed: seed_for_report(cfg, seed_override),
        steps: diag.steps.clone(),
        summary,
        wall_clock_seconds: started.elapsed().as_secs_f64(),
    };
    write_json(&out_dir.join("report.json"), &report)?;

    let exit_code = if diverged && !cfg.checks.divergence_expected {
        EXIT_DIVERGENCE
    } else if report.summary.all_ok {
        0
    } else {
        EXIT_CHECK_FAILED
    };
    Ok(RunOutput { report, exit_code })
}

fn seed_for_report(cfg: &ScenarioConfig, seed_override: Option<u64>) -> Option<u64> {
    cfg.generator.as_ref().map(|g| {
        let own = match g {
            GeneratorSpec::Toy { seed, .. } => *seed,
            GeneratorSpec::DriftingQp { seed, .. } => *seed,
            GeneratorSpec::Opf { seed, .. } => *seed,
        };
        seed_override.or(cfg.seed).unwrap_or(own)
    })
}

fn contraction_rate(p: &SolverParams) -> f64 {
    1.0 / (1.0 + p.delta).sqrt()
}

#[allow(clippy::too_many_arguments)]
fn diagnose(
    snaps: &[ProblemSnapshot],
    traj: &Trajectory,
    oracle: &OracleData,
    p: &SolverParams,
    checks: &ChecksSpec,
    is_static: bool,
    iters_per_record: usize,
    w0: &SolverState,
) -> Result<Diagnostics, CliError> {
    let metric = GMetric::from_params(p);
    let g_dist = |a: &SolverState, b: &SolverState| {
        metric.norm(&(&a.x - &b.x), &(&a.y - &b.y), &(&a.lambda - &b.lambda))
    };
    let rate = contraction_rate(p);
    let effective_rate = rate.powi(iters_per_record.max(1) as i32);

    let g_err_initial = oracle
        .sols
        .first()
        .map(|s| g_dist(w0, &s.w_star))
        .unwrap_or(0.0);

    let mut steps = Vec::with_capacity(traj.len());
    let mut lambda_norms = Vec::with_capacity(traj.len());
    let mut lagrangians = Vec::with_capacity(traj.len());
    let mut prev_err = g_err_initial;
    for (k, rec) in traj.records.iter().enumerate() {
        let sol = &oracle.sols[oracle.index[k]];
        let snap = if is_static { &snaps[0] } else { &snaps[k] };
        let g_err = g_dist(&rec.state, &sol.w_star);
        // Oracle drift entering step k: weighted-norm distance between the
        // consecutive stationary points (zero on the first record and on
        // static runs, whose target never moves).
        let drift = if k == 0 || is_static {
            0.0
        } else {
            let prev_sol = &oracle.sols[oracle.index[k - 1]];
            g_dist(&prev_sol.w_star, &sol.w_star)
        };
        let denom = prev_err + drift;
        let contraction_ratio = if denom > checks.g_err_floor {
            Some(g_err / denom)
        } else {
            None
        };
        let bound_rhs = effective_rate * denom + checks.contraction_slack;
        let akkt_res = akkt_residual(snap, &rec.state, p.gamma, p)
            .map_err(|e| CliError::Oracle(format!("residual evaluation: {e}")))?;
        steps.push(StepReport {
            k,
            g_err,
            contraction_ratio,
            bound_rhs,
            akkt_res,
            primal_res: rec.primal_residual,
        });
        lambda_norms.push(rec.state.lambda.norm());
        lagrangians.push(rec.lagrangian);
        prev_err = g_err;
    }
    Ok(Diagnostics {
        steps,
        lambda_norms,
        lagrangians,
        g_err_initial,
        effective_rate,
        rate,
    })
}

fn build_summary(
    diag: &Diagnostics,
    oracle: &OracleData,
    p: &SolverParams,
    checks: &ChecksSpec,
    is_static: bool,
) -> Summary {
    let mut s = Summary::passing();

    let max_of = |it: &mut dyn Iterator<Item = f64>| {
        it.fold(None, |acc: Option<f64>, v| Some(acc.map_or(v, |a| a.max(v))))
    };
    s.max_contraction_ratio = max_of(&mut diag.steps.iter().filter_map(|st| st.contraction_ratio));
    if let Some(max_ratio) = s.max_contraction_ratio {
        // Ratios are only formed above the error floor; the slack applies
        // directly to the ratio there.
        s.contraction_ok = max_ratio <= diag.effective_rate + checks.contraction_slack;
    }
    s.recursion_ok = diag.steps.iter().all(|st| st.g_err <= st.bound_rhs);

    if !diag.steps.is_empty() {
        let window = checks.steady_state_window.min(diag.steps.len());
        let steady = diag.steps[diag.steps.len() - window..]
            .iter()
            .map(|st| st.g_err)
            .fold(0.0_f64, f64::max);
        s.steady_state_g_err = Some(steady);
        if !is_static && oracle.sols.len() >= 2 {
            if let Ok(drifts) = measure_drifts(&oracle.sols) {
                if drifts.drift_x > 0.0 || drifts.drift_y > 0.0 || drifts.drift_lambda > 0.0 {
                    if let Ok((bound, _psi)) = tracking_bound(p, &drifts) {
                        s.tracking_bound = Some(bound);
                        s.tracking_ok = steady <= bound;
                    }
                }
            }
        }
    }

    // Dual-iterate boundedness on static runs. Contraction keeps the
    // weighted error below its initial value (plus the accumulated additive
    // slack, summed as a geometric tail), and the dual component of the
    // weighted norm carries a 1/sqrt(beta) factor:
    // |lambda_k| <= sqrt(beta) * (g_err_init + slack/(1-rate)) + |lambda_star|.
    if is_static {
        let max_lambda = max_of(&mut diag.lambda_norms.iter().cloned());
        if let (Some(max_l), Some(sol)) = (max_lambda, oracle.sols.first()) {
            let slack_tail = checks.contraction_slack / (1.0 - diag.rate).max(f64::MIN_POSITIVE);
            let budget =
                p.beta.sqrt() * (diag.g_err_initial + slack_tail) + sol.w_star.lambda.norm();
            s.dual_bound_ok = max_l <= budget + checks.contraction_slack;
        }
    }

    if let Some(last) = oracle.sols.last() {
        s.lambda_star_norm = Some(last.w_star.lambda.norm());
        if let Some(opt) = &last.w_opt {
            let dx = (&last.w_star.x - &opt.x).norm_squared();
            let dy = (&last.w_star.y - &opt.y).norm_squared();
            s.v_gap = Some((dx + dy).sqrt());
            s.lambda_opt_norm = Some(opt.lambda.norm());
        }
    }
    s
}

fn write_trajectory_csv(out_dir: &Path, diag: &Diagnostics) -> Result<(), CliError> {
    let rows: Vec<Vec<String>> = diag
        .steps
        .iter()
        .enumerate()
        .map(|(i, st)| {
            vec![
                st.k.to_string(),
                fmt_float(st.g_err),
                fmt_float(st.primal_res),
                fmt_float(st.akkt_res),
                fmt_float(diag.lambda_norms[i]),
                fmt_float(diag.lagrangians[i]),
            ]
        })
        .collect();
    write_csv(
        &out_dir.join("trajectory.csv"),
        &[
            "k",
            "g_err",
            "primal_res",
            "akkt_res",
            "lambda_norm",
            "lagrangian",
        ],
        &rows,
    )
}

fn write_oracle_csv(out_dir: &Path, oracle: &OracleData) -> Result<(), CliError> {
    let mut rows = Vec::with_capacity(oracle.sols.len());
    for (k, sol) in oracle.sols.iter().enumerate() {
        let (dx, dy, dl) = if k == 0 {
            (0.0, 0.0, 0.0)
        } else {
            let prev = &oracle.sols[k - 1].w_star;
            (
                (&sol.w_star.x - &prev.x).norm(),
                (&sol.w_star.y - &prev.y).norm(),
                (&sol.w_star.lambda - &prev.lambda).norm(),
            )
        };
        rows.push(vec![
            k.to_string(),
            fmt_float(sol.w_star.x.norm()),
            fmt_float(sol.w_star.y.norm()),
            fmt_float(sol.w_star.lambda.norm()),
            fmt_float(sol.akkt_residual),
            fmt_float(dx),
            fmt_float(dy),
            fmt_float(dl),
        ]);
    }
    write_csv(
        &out_dir.join("oracle.csv"),
        &[
            "k",
            "x_star_norm",
            "y_star_norm",
            "lambda_star_norm",
            "akkt_res",
            "drift_x",
            "drift_y",
            "drift_lambda",
        ],
        &rows,
    )
}

fn write_opf_metrics_csv(
    out_dir: &Path,
    traj: &Trajectory,
    cfg: &OpfConfig,
) -> Result<(), CliError> {
    let metrics =
        opf_metrics(traj, cfg).map_err(|e| CliError::Schema(format!("power metrics: {e}")))?;
    let rows: Vec<Vec<String>> = metrics
        .iter()
        .enumerate()
        .map(|(k, m)| {
            vec![
                k.to_string(),
                fmt_float(m.voltage_violation),
                fmt_float(m.power_violation),
                fmt_float(m.consensus_violation),
            ]
        })
        .collect();
    write_csv(
        &out_dir.join("opf_metrics.csv"),
        &[
            "k",
            "voltage_violation",
            "power_violation",
            "consensus_violation",
        ],
        &rows,
    )
}

/// Resolves the output directory: `--out`, else the `PADMM_OUT` environment
/// variable, else `./padmm-out`.
pub fn resolve_out_dir(cli_out: Option<PathBuf>) -> PathBuf {
    cli_out
        .or_else(|| std::env::var_os("PADMM_OUT").map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("padmm-out"))
}
