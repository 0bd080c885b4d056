//! Parameter sweeps: runs the same scenario once per axis value, each point
//! in its own output directory, and aggregates one summary row per value
//! into `sweep.csv`. Points are independent (one failure does not stop the
//! rest) and the row order always follows the input value order, regardless
//! of worker scheduling.

use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use crate::config::{GeneratorSpec, ScenarioConfig};
use crate::csvio::{fmt_float, fmt_opt, write_csv};
use crate::runner::run_config;
use crate::CliError;

/// Sweepable parameter axes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    Gamma,
    Beta,
    DriftAmplitude,
    Seed,
}

impl Axis {
    pub fn parse(name: &str) -> Result<Axis, CliError> {
        match name {
            "gamma" => Ok(Axis::Gamma),
            "beta" => Ok(Axis::Beta),
            "drift_amplitude" => Ok(Axis::DriftAmplitude),
            "seed" => Ok(Axis::Seed),
            other => Err(CliError::Schema(format!(
                "unknown sweep axis \"{other}\"; expected one of gamma, beta, drift_amplitude, seed"
            ))),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Axis::Gamma => "gamma",
            Axis::Beta => "beta",
            Axis::DriftAmplitude => "drift_amplitude",
            Axis::Seed => "seed",
        }
    }
}

/// Parses the `--values` comma-separated list.
pub fn parse_values(list: &str) -> Result<Vec<f64>, CliError> {
    let mut out = Vec::new();
    for item in list.split(',') {
        let item = item.trim();
        if item.is_empty() {
            continue;
        }
        let v: f64 = item
            .parse()
            .map_err(|_| CliError::Schema(format!("--values: \"{item}\" is not a number")))?;
        out.push(v);
    }
    if out.is_empty() {
        return Err(CliError::Schema(String::from(
            "--values: at least one value is required",
        )));
    }
    Ok(out)
}

fn apply_axis(cfg: &mut ScenarioConfig, axis: Axis, v: f64) -> Result<(), CliError> {
    match axis {
        Axis::Gamma => {
            if !(v.is_finite() && v > 0.0) {
                return Err(CliError::Schema(format!(
                    "gamma values must be positive and finite, got {v}"
                )));
            }
            cfg.params.gamma = v;
        }
        Axis::Beta => {
            if !(v.is_finite() && v > 0.0) {
                return Err(CliError::Schema(format!(
                    "beta values must be positive and finite, got {v}"
                )));
            }
            cfg.params.beta = v;
        }
        Axis::DriftAmplitude => match &mut cfg.generator {
            Some(GeneratorSpec::DriftingQp {
                drift_amplitude, ..
            }) => {
                if !(v.is_finite() && v >= 0.0) {
                    return Err(CliError::Schema(format!(
                        "drift_amplitude values must be nonnegative and finite, got {v}"
                    )));
                }
                *drift_amplitude = v;
            }
            _ => {
                return Err(CliError::Schema(String::from(
                    "drift_amplitude sweeps require a drifting_qp generator",
                )))
            }
        },
        Axis::Seed => {
            if !(v.is_finite() && v >= 0.0 && v.fract() == 0.0 && v <= u64::MAX as f64) {
                return Err(CliError::Schema(format!(
                    "seed values must be nonnegative integers, got {v}"
                )));
            }
            cfg.seed = Some(v as u64);
        }
    }
    Ok(())
}

/// One aggregated row of the sweep CSV.
pub struct SweepRow {
    pub value: f64,
    pub exit_code: i32,
    pub max_contraction_ratio: Option<f64>,
    pub steady_state_g_err: Option<f64>,
    pub tracking_bound: Option<f64>,
    pub final_g_err: Option<f64>,
    pub v_gap: Option<f64>,
    pub lambda_star_norm: Option<f64>,
    pub lambda_opt_norm: Option<f64>,
    pub all_ok: bool,
}

pub const SWEEP_HEADER: [&str; 11] = [
    "axis",
    "value",
    "exit_code",
    "max_contraction_ratio",
    "steady_state_g_err",
    "tracking_bound",
    "final_g_err",
    "v_gap",
    "lambda_star_norm",
    "lambda_opt_norm",
    "all_ok",
];

fn row_cells(axis: Axis, row: &SweepRow) -> Vec<String> {
    vec![
        axis.name().to_string(),
        fmt_float(row.value),
        row.exit_code.to_string(),
        fmt_opt(row.max_contraction_ratio),
        fmt_opt(row.steady_state_g_err),
        fmt_opt(row.tracking_bound),
        fmt_opt(row.final_g_err),
        fmt_opt(row.v_gap),
        fmt_opt(row.lambda_star_norm),
        fmt_opt(row.lambda_opt_norm),
        row.all_ok.to_string(),
    ]
}

/// Runs the sweep and writes `out_dir/sweep.csv`. Returns the rows and the
/// aggregate exit code (0 iff every point exited 0; otherwise the first
/// nonzero code in value order).
pub fn run_sweep(
    config_path: &Path,
    out_dir: &Path,
    axis_name: &str,
    values_list: &str,
    workers: usize,
    seed_override: Option<u64>,
) -> Result<(Vec<SweepRow>, i32), CliError> {
    let axis = Axis::parse(axis_name)?;
    let values = parse_values(values_list)?;
    let text = std::fs::read_to_string(config_path)
        .map_err(|e| CliError::Schema(format!("cannot read {}: {e}", config_path.display())))?;
    let base = ScenarioConfig::parse(&text)?;
    let scenario_id = base.id.clone().unwrap_or_else(|| {
        config_path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| String::from("scenario"))
    });
    std::fs::create_dir_all(out_dir)?;

    // Validate every point's config up front so an invalid value fails the
    // whole sweep as a schema error before anything runs.
    let mut point_cfgs = Vec::with_capacity(values.len());
    for &v in &values {
        let mut cfg = base.clone();
        apply_axis(&mut cfg, axis, v)?;
        if axis == Axis::Gamma {
            // Fill the perturbation-gap column for slope checks.
            cfg.checks.compare_unperturbed = true;
        }
        point_cfgs.push(cfg);
    }

    let results: Vec<Option<Result<SweepRow, CliError>>> = {
        let slots: Mutex<Vec<Option<Result<SweepRow, CliError>>>> =
            Mutex::new((0..values.len()).map(|_| None).collect());
        let next = AtomicUsize::new(0);
        let worker_count = workers.max(1).min(values.len());
        std::thread::scope(|scope| {
            for _ in 0..worker_count {
                scope.spawn(|| loop {
                    let idx = next.fetch_add(1, Ordering::Relaxed);
                    if idx >= point_cfgs.len() {
                        break;
                    }
                    let point_dir = out_dir.join(format!("point_{idx:03}"));
                    let outcome = run_config(
                        &point_cfgs[idx],
                        &format!("{scenario_id}[{}={}]", axis.name(), values[idx]),
                        &point_dir,
                        seed_override,
                    )
                    .map(|out| {
                        let s = &out.report.summary;
                        SweepRow {
                            value: values[idx],
                            exit_code: out.exit_code,
                            max_contraction_ratio: s.max_contraction_ratio,
                            steady_state_g_err: s.steady_state_g_err,
                            tracking_bound: s.tracking_bound,
                            final_g_err: out.report.steps.last().map(|st| st.g_err),
                            v_gap: s.v_gap,
                            lambda_star_norm: s.lambda_star_norm,
                            lambda_opt_norm: s.lambda_opt_norm,
                            all_ok: s.all_ok,
                        }
                    });
                    slots.lock().expect("sweep slot lock")[idx] = Some(outcome);
                });
            }
        });
        slots.into_inner().expect("sweep slot lock")
    };

    let mut rows = Vec::with_capacity(values.len());
    for (i, slot) in results.into_iter().enumerate() {
        let outcome = slot.expect("every sweep point runs exactly once");
        match outcome {
            Ok(row) => rows.push(row),
            Err(e) => rows.push(SweepRow {
                value: values[i],
                exit_code: e.exit_code(),
                max_contraction_ratio: None,
                steady_state_g_err: None,
                tracking_bound: None,
                final_g_err: None,
                v_gap: None,
                lambda_star_norm: None,
                lambda_opt_norm: None,
                all_ok: false,
            }),
        }
    }

    let cells: Vec<Vec<String>> = rows.iter().map(|r| row_cells(axis, r)).collect();
    write_csv(&out_dir.join("sweep.csv"), &SWEEP_HEADER, &cells)?;

    let exit = rows
        .iter()
        .map(|r| r.exit_code)
        .find(|&c| c != 0)
        .unwrap_or(0);
    Ok((rows, exit))
}
