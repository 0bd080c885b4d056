//! Scenario configuration schema.
//!
//! A scenario file is a JSON object with exactly one problem source —
//! `"snapshots"` (an explicit list of problem data) or `"generator"`
//! (a named synthetic family) — plus solver parameters, an iteration
//! budget, an optional seed, and check tolerances:
//!
//! ```json
//! {
//!   "generator": {"kind": "drifting_qp", "m": 10, "n": 10, "l": 5,
//!                  "drift_amplitude": 0.05, "horizon": 2000},
//!   "params": {"beta": 0.5, "gamma": 1.0, "alpha1": "auto", "alpha2": "auto"},
//!   "iters_per_step": 1,
//!   "seed": 7
//! }
//! ```
//!
//! Every tolerance used by the run-time checks lives in `"checks"` with the
//! documented defaults, so thresholds are auditable from the config alone.

use padmm_core::atoms::{Atom, Quadratic, SeparableFunction};
use padmm_core::nalgebra::{DMatrix, DVector};
use padmm_core::scenario::{DriftKind, DriftingQpConfig, OpfConfig, ToyConfig};
use padmm_core::ProblemSnapshot;
use serde::Deserialize;

use crate::CliError;

fn d_beta() -> f64 {
    0.5
}
fn d_gamma() -> f64 {
    1.0
}
fn d_one() -> usize {
    1
}
fn d_true() -> bool {
    true
}
fn d_toy_dim() -> usize {
    5
}
fn d_toy_step() -> f64 {
    0.1
}
fn d_toy_gamma() -> f64 {
    1.0
}
fn d_toy_steps() -> usize {
    500
}
fn d_contraction_slack() -> f64 {
    1e-9
}
fn d_g_err_floor() -> f64 {
    1e-10
}
fn d_steady_window() -> usize {
    200
}
fn d_oracle_cap() -> usize {
    1_000_000
}

/// Top-level scenario file.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    /// Label used in reports; defaults to the config file stem.
    #[serde(default)]
    pub id: Option<String>,
    /// Explicit problem sequence (mutually exclusive with `generator`).
    #[serde(default)]
    pub snapshots: Option<Vec<SnapshotSpec>>,
    /// Synthetic scenario family (mutually exclusive with `snapshots`).
    #[serde(default)]
    pub generator: Option<GeneratorSpec>,
    #[serde(default)]
    pub params: ParamsSpec,
    /// Iterations applied per snapshot; with a single snapshot this is the
    /// total iteration count of a static run recorded per iteration.
    #[serde(default = "d_one")]
    pub iters_per_step: usize,
    /// Overrides the generator's seed when present; itself overridden by
    /// `--seed` on the command line.
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub checks: ChecksSpec,
}

/// Solver parameters; step sizes are `"auto"` (derived from measured problem
/// bounds) or explicit numbers — mixing the two is rejected.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamsSpec {
    #[serde(default = "d_beta")]
    pub beta: f64,
    #[serde(default = "d_gamma")]
    pub gamma: f64,
    #[serde(default)]
    pub alpha1: StepSpec,
    #[serde(default)]
    pub alpha2: StepSpec,
}

impl Default for ParamsSpec {
    fn default() -> Self {
        ParamsSpec {
            beta: d_beta(),
            gamma: d_gamma(),
            alpha1: StepSpec::default(),
            alpha2: StepSpec::default(),
        }
    }
}

/// A step size: `"auto"` or a positive number.
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum StepSpec {
    Fixed(f64),
    Named(String),
}

impl Default for StepSpec {
    fn default() -> Self {
        StepSpec::Named(String::from("auto"))
    }
}

impl StepSpec {
    /// `None` for auto, `Some(v)` for a validated explicit value.
    pub fn resolve(&self, name: &str) -> Result<Option<f64>, CliError> {
        match self {
            StepSpec::Named(s) if s == "auto" => Ok(None),
            StepSpec::Named(s) => Err(CliError::Schema(format!(
                "{name}: expected \"auto\" or a positive number, got \"{s}\""
            ))),
            StepSpec::Fixed(v) if v.is_finite() && *v > 0.0 => Ok(Some(*v)),
            StepSpec::Fixed(v) => Err(CliError::Schema(format!(
                "{name}: step size must be positive and finite, got {v}"
            ))),
        }
    }
}

/// Check tolerances with their documented defaults.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChecksSpec {
    /// Additive slack on the per-step contraction/recursion inequalities.
    #[serde(default = "d_contraction_slack")]
    pub contraction_slack: f64,
    /// Contraction ratios are only formed while the previous error exceeds
    /// this floor.
    #[serde(default = "d_g_err_floor")]
    pub g_err_floor: f64,
    /// Steady-state error = max error over the trailing window of this size.
    #[serde(default = "d_steady_window")]
    pub steady_state_window: usize,
    /// Oracle residual tolerance; per-method default when omitted.
    #[serde(default)]
    pub oracle_tolerance: Option<f64>,
    /// Iteration cap for the fixed-point oracle.
    #[serde(default = "d_oracle_cap")]
    pub oracle_iteration_cap: usize,
    /// Treat divergence as an acceptable outcome (exit 0 instead of 3).
    #[serde(default)]
    pub divergence_expected: bool,
    /// Also solve the unperturbed stationary system and report the distance
    /// between the perturbed and unperturbed primal solutions.
    #[serde(default)]
    pub compare_unperturbed: bool,
}

impl Default for ChecksSpec {
    fn default() -> Self {
        ChecksSpec {
            contraction_slack: d_contraction_slack(),
            g_err_floor: d_g_err_floor(),
            steady_state_window: d_steady_window(),
            oracle_tolerance: None,
            oracle_iteration_cap: d_oracle_cap(),
            divergence_expected: false,
            compare_unperturbed: false,
        }
    }
}

/// One explicit problem: quadratic smooth parts, optional nonsmooth atoms
/// laid out over index spans, and the coupling data.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SnapshotSpec {
    pub f1: QuadSpec,
    #[serde(default)]
    pub f0: Vec<SpanAtomSpec>,
    pub g1: QuadSpec,
    #[serde(default)]
    pub g0: Vec<SpanAtomSpec>,
    /// Constraint matrix on the first block, rows × dim_x.
    pub a: Vec<Vec<f64>>,
    /// Constraint matrix on the second block, rows × dim_y.
    pub b: Vec<Vec<f64>>,
    pub rhs: Vec<f64>,
}

/// Dense quadratic `0.5 z'Pz + q'z + r`.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuadSpec {
    pub p: Vec<Vec<f64>>,
    pub q: Vec<f64>,
    #[serde(default)]
    pub r: f64,
}

/// A nonsmooth atom covering the half-open coordinate span `[span[0], span[1])`.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpanAtomSpec {
    pub span: [usize; 2],
    pub atom: AtomSpec,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum AtomSpec {
    Quadratic {
        p: Vec<Vec<f64>>,
        q: Vec<f64>,
        #[serde(default)]
        r: f64,
    },
    WeightedL1 {
        weights: Vec<f64>,
    },
    Box {
        lower: Vec<f64>,
        upper: Vec<f64>,
    },
    Nonneg,
    Zero,
}

/// Synthetic scenario families.
#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum GeneratorSpec {
    /// Bilinear saddle recursion (its own two-variable iteration, not the
    /// main solver): demonstrates divergence without the dual shrink and
    /// decay with it.
    Toy {
        #[serde(default = "d_toy_dim")]
        dim: usize,
        #[serde(default = "d_toy_step")]
        alpha: f64,
        #[serde(default = "d_toy_step")]
        beta: f64,
        #[serde(default = "d_toy_gamma")]
        gamma: f64,
        #[serde(default = "d_toy_steps")]
        steps: usize,
        #[serde(default)]
        seed: u64,
        /// `false` runs the plain (shrink-free) recursion.
        #[serde(default = "d_true")]
        perturbed: bool,
    },
    /// Strongly convex quadratic with optional L1 term and a drifting
    /// constraint, in one of three drift modes.
    DriftingQp {
        m: usize,
        n: usize,
        l: usize,
        #[serde(default)]
        drift_amplitude: f64,
        #[serde(default)]
        drift_kind: DriftKindSpec,
        horizon: usize,
        #[serde(default)]
        l1_weight: f64,
        #[serde(default)]
        seed: u64,
    },
    /// Chain of power clusters with voltage-band slacks and inter-cluster
    /// flow consensus.
    Opf {
        #[serde(default = "d_opf_clusters")]
        clusters: usize,
        #[serde(default = "d_opf_nodes")]
        nodes_per_cluster: usize,
        #[serde(default = "d_one")]
        horizon: usize,
        #[serde(default)]
        seed: u64,
        #[serde(default)]
        c_p: Option<f64>,
        #[serde(default)]
        c_q: Option<f64>,
        #[serde(default)]
        cbar_q: Option<f64>,
        #[serde(default)]
        a_lo: Option<f64>,
        #[serde(default)]
        a_hi: Option<f64>,
        #[serde(default)]
        v_min: Option<f64>,
        #[serde(default)]
        v_max: Option<f64>,
        /// Per-step, per-node available real power; defaults to all ones.
        #[serde(default)]
        p_available: Option<Vec<Vec<f64>>>,
        #[serde(default)]
        regularize_nodes: bool,
        /// Use (simulated) measured quantities in the constraint rows.
        #[serde(default)]
        measurement_feedback: bool,
    },
}

fn d_opf_clusters() -> usize {
    4
}
fn d_opf_nodes() -> usize {
    2
}

#[derive(Debug, Clone, Copy, Default, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DriftKindSpec {
    #[default]
    SinusoidB,
    RandomWalkB,
    RotatingA,
}

impl From<DriftKindSpec> for DriftKind {
    fn from(k: DriftKindSpec) -> DriftKind {
        match k {
            DriftKindSpec::SinusoidB => DriftKind::SinusoidB,
            DriftKindSpec::RandomWalkB => DriftKind::RandomWalkB,
            DriftKindSpec::RotatingA => DriftKind::RotatingA,
        }
    }
}

/// A scenario resolved to concrete run inputs.
pub enum Materialized {
    Toy {
        cfg: ToyConfig,
        perturbed: bool,
    },
    Solver {
        snaps: Vec<ProblemSnapshot>,
        kind: &'static str,
        /// Present for the power scenario so its violation metrics can be
        /// exported next to the trajectory.
        opf: Option<OpfConfig>,
    },
}

impl ScenarioConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let cfg: ScenarioConfig =
            serde_json::from_str(text).map_err(|e| CliError::Schema(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> Result<(), CliError> {
        match (&self.snapshots, &self.generator) {
            (Some(_), Some(_)) => {
                return Err(CliError::Schema(String::from(
                    "provide either \"snapshots\" or \"generator\", not both",
                )))
            }
            (None, None) => {
                return Err(CliError::Schema(String::from(
                    "one of \"snapshots\" or \"generator\" is required",
                )))
            }
            _ => {}
        }
        if let Some(snaps) = &self.snapshots {
            if snaps.is_empty() {
                return Err(CliError::Schema(String::from(
                    "\"snapshots\" must not be empty",
                )));
            }
        }
        let p = &self.params;
        if !(p.beta.is_finite() && p.beta > 0.0) {
            return Err(CliError::Schema(format!(
                "params.beta must be positive and finite, got {}",
                p.beta
            )));
        }
        if !(p.gamma.is_finite() && p.gamma > 0.0) {
            return Err(CliError::Schema(format!(
                "params.gamma must be positive and finite, got {}",
                p.gamma
            )));
        }
        p.alpha1.resolve("params.alpha1")?;
        p.alpha2.resolve("params.alpha2")?;
        if self.iters_per_step == 0 {
            return Err(CliError::Schema(String::from(
                "iters_per_step must be at least 1",
            )));
        }
        let c = &self.checks;
        for (name, v) in [
            ("checks.contraction_slack", c.contraction_slack),
            ("checks.g_err_floor", c.g_err_floor),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(CliError::Schema(format!(
                    "{name} must be positive and finite, got {v}"
                )));
            }
        }
        if let Some(tol) = c.oracle_tolerance {
            if !(tol.is_finite() && tol > 0.0) {
                return Err(CliError::Schema(format!(
                    "checks.oracle_tolerance must be positive and finite, got {tol}"
                )));
            }
        }
        if c.steady_state_window == 0 {
            return Err(CliError::Schema(String::from(
                "checks.steady_state_window must be at least 1",
            )));
        }
        if c.oracle_iteration_cap == 0 {
            return Err(CliError::Schema(String::from(
                "checks.oracle_iteration_cap must be at least 1",
            )));
        }
        Ok(())
    }

    /// Builds the concrete run inputs. `seed_override` (from `--seed`) wins
    /// over the file-level seed, which wins over the generator's own field.
    pub fn materialize(&self, seed_override: Option<u64>) -> Result<Materialized, CliError> {
        let seed_of = |gen_seed: u64| seed_override.or(self.seed).unwrap_or(gen_seed);
        if let Some(specs) = &self.snapshots {
            let snaps = build_snapshots(specs)?;
            return Ok(Materialized::Solver {
                snaps,
                kind: "snapshots",
                opf: None,
            });
        }
        match self.generator.as_ref().expect("validated") {
            GeneratorSpec::Toy {
                dim,
                alpha,
                beta,
                gamma,
                steps,
                seed,
                perturbed,
            } => {
                let cfg = ToyConfig::new(*dim, *alpha, *beta, *gamma, *steps, seed_of(*seed));
                Ok(Materialized::Toy {
                    cfg,
                    perturbed: *perturbed,
                })
            }
            GeneratorSpec::DriftingQp {
                m,
                n,
                l,
                drift_amplitude,
                drift_kind,
                horizon,
                l1_weight,
                seed,
            } => {
                let mut cfg = DriftingQpConfig::new(*m, *n, *l, *horizon);
                cfg.drift_amplitude = *drift_amplitude;
                cfg.drift_kind = (*drift_kind).into();
                cfg.l1_weight = *l1_weight;
                cfg.seed = seed_of(*seed);
                let snaps = padmm_core::scenario::gen_drifting_qp(&cfg)
                    .map_err(|e| CliError::Schema(format!("drifting_qp generator: {e}")))?;
                Ok(Materialized::Solver {
                    snaps,
                    kind: "drifting_qp",
                    opf: None,
                })
            }
            GeneratorSpec::Opf {
                clusters,
                nodes_per_cluster,
                horizon,
                seed,
                c_p,
                c_q,
                cbar_q,
                a_lo,
                a_hi,
                v_min,
                v_max,
                p_available,
                regularize_nodes,
                measurement_feedback,
            } => {
                let mut cfg =
                    OpfConfig::new(*clusters, *nodes_per_cluster, *horizon, seed_of(*seed));
                if let Some(v) = c_p {
                    cfg.c_p = *v;
                }
                if let Some(v) = c_q {
                    cfg.c_q = *v;
                }
                if let Some(v) = cbar_q {
                    cfg.cbar_q = *v;
                }
                if let Some(v) = a_lo {
                    cfg.a_lo = *v;
                }
                if let Some(v) = a_hi {
                    cfg.a_hi = *v;
                }
                if let Some(v) = v_min {
                    cfg.v_min = *v;
                }
                if let Some(v) = v_max {
                    cfg.v_max = *v;
                }
                if let Some(rows) = p_available {
                    cfg.p_available = rows
                        .iter()
                        .map(|r| DVector::from_column_slice(r))
                        .collect();
                }
                cfg.regularize_nodes = *regularize_nodes;
                cfg.measurement_feedback = *measurement_feedback;
                let snaps = padmm_core::scenario::gen_opf(&cfg)
                    .map_err(|e| CliError::Schema(format!("opf generator: {e}")))?;
                Ok(Materialized::Solver {
                    snaps,
                    kind: "opf",
                    opf: Some(cfg),
                })
            }
        }
    }
}

fn build_matrix(name: &str, rows: &[Vec<f64>]) -> Result<DMatrix<f64>, CliError> {
    if rows.is_empty() {
        return Err(CliError::Schema(format!("{name}: matrix must not be empty")));
    }
    let ncols = rows[0].len();
    if ncols == 0 {
        return Err(CliError::Schema(format!(
            "{name}: matrix rows must not be empty"
        )));
    }
    if rows.iter().any(|r| r.len() != ncols) {
        return Err(CliError::Schema(format!(
            "{name}: all matrix rows must have equal length"
        )));
    }
    let data: Vec<f64> = rows.iter().flatten().copied().collect();
    if data.iter().any(|v| !v.is_finite()) {
        return Err(CliError::Schema(format!(
            "{name}: matrix entries must be finite"
        )));
    }
    Ok(DMatrix::from_row_slice(rows.len(), ncols, &data))
}

fn build_vector(name: &str, data: &[f64]) -> Result<DVector<f64>, CliError> {
    if data.iter().any(|v| !v.is_finite()) {
        return Err(CliError::Schema(format!(
            "{name}: vector entries must be finite"
        )));
    }
    Ok(DVector::from_column_slice(data))
}

fn build_quadratic(name: &str, spec: &QuadSpec) -> Result<SeparableFunction, CliError> {
    let p = build_matrix(&format!("{name}.p"), &spec.p)?;
    let q = build_vector(&format!("{name}.q"), &spec.q)?;
    SeparableFunction::quadratic(p, q, spec.r).map_err(|e| CliError::Schema(format!("{name}: {e}")))
}

fn build_atom(name: &str, spec: &AtomSpec) -> Result<Atom, CliError> {
    match spec {
        AtomSpec::Quadratic { p, q, r } => {
            let p = build_matrix(&format!("{name}.p"), p)?;
            let q = build_vector(&format!("{name}.q"), q)?;
            Quadratic::new(p, q, *r)
                .map(Atom::Quadratic)
                .map_err(|e| CliError::Schema(format!("{name}: {e}")))
        }
        AtomSpec::WeightedL1 { weights } => {
            let w = build_vector(&format!("{name}.weights"), weights)?;
            Atom::weighted_l1(w).map_err(|e| CliError::Schema(format!("{name}: {e}")))
        }
        AtomSpec::Box { lower, upper } => {
            let lo = build_vector(&format!("{name}.lower"), lower)?;
            let hi = build_vector(&format!("{name}.upper"), upper)?;
            Atom::box_indicator(lo, hi).map_err(|e| CliError::Schema(format!("{name}: {e}")))
        }
        AtomSpec::Nonneg => Ok(Atom::Nonneg),
        AtomSpec::Zero => Ok(Atom::Zero),
    }
}

fn build_separable(
    name: &str,
    dim: usize,
    spans: &[SpanAtomSpec],
) -> Result<SeparableFunction, CliError> {
    if spans.is_empty() {
        return Ok(SeparableFunction::zero(dim));
    }
    let mut parts = Vec::with_capacity(spans.len());
    for (i, s) in spans.iter().enumerate() {
        let atom = build_atom(&format!("{name}[{i}].atom"), &s.atom)?;
        parts.push((s.span[0]..s.span[1], atom));
    }
    SeparableFunction::new(dim, parts).map_err(|e| CliError::Schema(format!("{name}: {e}")))
}

fn build_snapshots(specs: &[SnapshotSpec]) -> Result<Vec<ProblemSnapshot>, CliError> {
    let mut out = Vec::with_capacity(specs.len());
    for (k, spec) in specs.iter().enumerate() {
        let ctx = |part: &str| format!("snapshots[{k}].{part}");
        let f1 = build_quadratic(&ctx("f1"), &spec.f1)?;
        let g1 = build_quadratic(&ctx("g1"), &spec.g1)?;
        let a = build_matrix(&ctx("a"), &spec.a)?;
        let b = build_matrix(&ctx("b"), &spec.b)?;
        let rhs = build_vector(&ctx("rhs"), &spec.rhs)?;
        let f0 = build_separable(&ctx("f0"), a.ncols(), &spec.f0)?;
        let g0 = build_separable(&ctx("g0"), b.ncols(), &spec.g0)?;
        let snap = ProblemSnapshot::new(k as u64, f1, f0, g1, g0, a, b, rhs)
            .map_err(|e| CliError::Schema(format!("snapshots[{k}]: {e}")))?;
        out.push(snap);
    }
    let (dx, dy, dc) = (out[0].dim_x(), out[0].dim_y(), out[0].dim_constraints());
    for (k, s) in out.iter().enumerate().skip(1) {
        if (s.dim_x(), s.dim_y(), s.dim_constraints()) != (dx, dy, dc) {
            return Err(CliError::Schema(format!(
                "snapshots[{k}]: dimensions differ from snapshots[0]"
            )));
        }
    }
    Ok(out)
}
