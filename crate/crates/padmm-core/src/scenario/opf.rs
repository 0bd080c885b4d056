//! Synthetic multi-area grid-dispatch family.
//!
//! `C` clusters sit on a chain; cluster `i` has `N` internal nodes, each
//! with a real power setpoint `P` (boxed to `[0, p_available]`) and a
//! reactive one `Q` (quadratic cost plus a weighted L1 pull toward 0).
//! Neighboring clusters exchange power through a pair of directed
//! 2-component flow variables whose sum must vanish (consensus).
//!
//! Block `x` stacks all node variables `(P, Q)` cluster by cluster,
//! followed by the directed flow pairs. Block `y` holds per-node voltage
//! slack vectors `(slack_lo, slack_hi)`, nonnegative through an indicator,
//! with strongly convex quadratic costs. The constraint rows are:
//!
//! * per node, `V(x) - slack_lo = v_min` and `V(x) + slack_hi = v_max`,
//!   where `V(x)` is an affine voltage model with seeded sensitivities —
//!   together they box the voltage hard while the slack costs pull it
//!   toward a weighted midpoint;
//! * per directed flow, `flow - M * (source cluster nodes) - (incoming
//!   flow of the source) = m` — an affine aggregate-power model whose
//!   pass-through term keeps the chain consistent;
//! * per neighbor pair, `flow_forward + flow_reverse = 0`.
//!
//! All coefficients are seeded with controlled magnitudes, and the affine
//! offsets `m` are calibrated so that a fully dispatched point
//! (`P = p_available`, `Q = 0`) extends to an exactly feasible point with
//! interior voltages — which keeps multipliers small and constraint
//! violations near the perturbation floor on converged runs.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::atoms::{Atom, SeparableFunction};
use crate::problem::ProblemSnapshot;
use crate::solver::Trajectory;
use crate::CoreError;

/// Curvature ridge on the flow variables (and, when
/// [`OpfConfig::regularize_nodes`] is set, on the node variables), keeping
/// the smooth x-cost strongly convex.
pub const FLOW_RIDGE: f64 = 1e-3;

/// Scale of the seeded voltage sensitivities (per-unit voltage change per
/// unit of injected power).
const VOLTAGE_SENS_SCALE: f64 = 0.005;

/// Scale of the seeded jitter on the base voltage profile.
const VOLTAGE_JITTER: f64 = 0.01;

#[derive(Debug, Clone, PartialEq)]
pub struct OpfConfig {
    pub clusters: usize,
    pub nodes_per_cluster: usize,
    /// Real-power tracking weight.
    pub c_p: f64,
    /// Reactive-power quadratic weight.
    pub c_q: f64,
    /// Reactive-power L1 weight (0 disables the nonsmooth pull).
    pub cbar_q: f64,
    /// Lower-slack quadratic weight.
    pub a_lo: f64,
    /// Upper-slack quadratic weight.
    pub a_hi: f64,
    pub v_min: f64,
    pub v_max: f64,
    /// Available real power per node, one vector (length
    /// `clusters * nodes_per_cluster`) per time step.
    pub p_available: Vec<DVector<f64>>,
    pub horizon: usize,
    pub seed: u64,
    /// Adds the curvature ridge to the node variables too, allowing zero
    /// `c_p`/`c_q` while keeping the smooth cost strongly convex.
    pub regularize_nodes: bool,
    /// Substitute measured voltages and aggregate powers for the
    /// model-predicted ones when forming the constraint rows. Measurements
    /// here are simulated from the same linear model, so they coincide with
    /// the predictions and the generated data is identical either way; the
    /// flag exists as the interface hook for external measurement sources.
    pub measurement_feedback: bool,
}

impl OpfConfig {
    /// Defaults: weights `c_p = 3`, `c_q = 1`, `cbar_q = 0.1`, unit slack
    /// weights, voltage band `[0.95, 1.05]` per unit, and one unit of
    /// available power per node at every step.
    pub fn new(clusters: usize, nodes_per_cluster: usize, horizon: usize, seed: u64) -> Self {
        let nodes = clusters * nodes_per_cluster;
        Self {
            clusters,
            nodes_per_cluster,
            c_p: 3.0,
            c_q: 1.0,
            cbar_q: 0.1,
            a_lo: 1.0,
            a_hi: 1.0,
            v_min: 0.95,
            v_max: 1.05,
            p_available: vec![DVector::repeat(nodes, 1.0); horizon],
            horizon,
            seed,
            regularize_nodes: false,
            measurement_feedback: false,
        }
    }
}

/// Per-step constraint-violation indices of a dispatch trajectory.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OpfMetrics {
    /// Sum over nodes of the voltage band violation
    /// `max(V - v_max, 0) + max(v_min - V, 0)` (not squared).
    pub voltage_violation: f64,
    /// Squared residual of the aggregate-power flow equations.
    pub power_violation: f64,
    /// Squared residual of the flow consensus rows.
    pub consensus_violation: f64,
}

/// Assembled dispatch model: constraint matrices, voltage model, cost
/// layout, and an engineered exactly-feasible reference point.
#[derive(Debug, Clone)]
pub struct OpfModel {
    cfg: OpfConfig,
    dim_x: usize,
    dim_y: usize,
    dim_c: usize,
    node_count: usize,
    edge_count: usize,
    flow_offset: usize,
    a_mat: DMatrix<f64>,
    b_mat: DMatrix<f64>,
    rhs: DVector<f64>,
    voltage_sens: DMatrix<f64>,
    v0: DVector<f64>,
    x_ref: DVector<f64>,
    y_ref: DVector<f64>,
}

impl OpfModel {
    pub fn from_config(cfg: &OpfConfig) -> Result<Self, CoreError> {
        validate(cfg)?;
        let nodes = cfg.nodes_per_cluster;
        let node_count = cfg.clusters * nodes;
        let edge_count = cfg.clusters - 1;
        let flow_offset = 2 * node_count;
        let dim_x = flow_offset + 4 * edge_count;
        let dim_y = 2 * node_count;
        let dim_c = 2 * node_count + 6 * edge_count;

        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        fn clamped(rng: &mut ChaCha8Rng) -> f64 {
            let z: f64 = rng.sample(StandardNormal);
            z.clamp(-2.0, 2.0)
        }

        // Base voltage profile with mild jitter, kept strictly inside the
        // band so a zero-dispatch grid is interior.
        let v0 = DVector::from_fn(node_count, |_, _| 1.0 + VOLTAGE_JITTER * clamped(&mut rng));

        // Per-cluster node sensitivities, then per directed flow (forward
        // before reverse) the receiving cluster's sensitivities and the
        // aggregate-power map. Draw order is part of the seeded contract.
        let mut cluster_sens = Vec::with_capacity(cfg.clusters);
        for _ in 0..cfg.clusters {
            cluster_sens.push(DMatrix::from_fn(nodes, 2 * nodes, |_, _| {
                VOLTAGE_SENS_SCALE * clamped(&mut rng)
            }));
        }
        let mut flow_sens = Vec::with_capacity(2 * edge_count);
        let mut flow_maps = Vec::with_capacity(2 * edge_count);
        for _ in 0..edge_count {
            for _ in 0..2 {
                flow_sens.push(DMatrix::from_fn(nodes, 2, |_, _| {
                    VOLTAGE_SENS_SCALE * clamped(&mut rng)
                }));
                // Aggregate map: near-unit weight on the matching power
                // component of every source node, small cross terms.
                flow_maps.push(DMatrix::from_fn(2, 2 * nodes, |r, c| {
                    let same_component = c % 2 == r;
                    if same_component {
                        1.0 + 0.1 * clamped(&mut rng)
                    } else {
                        0.05 * clamped(&mut rng)
                    }
                }));
            }
        }

        // Column index helpers.
        let cluster_col = |i: usize| i * 2 * nodes;
        let flow_col = |e: usize, dir: usize| flow_offset + 4 * e + 2 * dir;
        // Directed flow (e, 0) carries cluster e -> e+1; (e, 1) the reverse.
        let source_of = |e: usize, dir: usize| if dir == 0 { e } else { e + 1 };
        let receiver_of = |e: usize, dir: usize| if dir == 0 { e + 1 } else { e };
        // The source cluster's other incoming flow, when the chain extends
        // behind it.
        let incoming_of = |e: usize, dir: usize| -> Option<(usize, usize)> {
            if dir == 0 {
                if e >= 1 {
                    Some((e - 1, 0))
                } else {
                    None
                }
            } else if e + 2 <= edge_count {
                Some((e + 1, 1))
            } else {
                None
            }
        };

        // Voltage model V(x) = v0 + voltage_sens * x.
        let mut voltage_sens = DMatrix::zeros(node_count, dim_x);
        for c in 0..cfg.clusters {
            for t in 0..nodes {
                let g = c * nodes + t;
                for j in 0..2 * nodes {
                    voltage_sens[(g, cluster_col(c) + j)] = cluster_sens[c][(t, j)];
                }
            }
        }
        for e in 0..edge_count {
            for dir in 0..2 {
                let rc = receiver_of(e, dir);
                let sens = &flow_sens[2 * e + dir];
                for t in 0..nodes {
                    let g = rc * nodes + t;
                    for j in 0..2 {
                        voltage_sens[(g, flow_col(e, dir) + j)] = sens[(t, j)];
                    }
                }
            }
        }

        // Reference dispatch: full available power, zero reactive power,
        // and a moderate rightward flow profile.
        let p0 = &cfg.p_available[0];
        let mut x_ref = DVector::zeros(dim_x);
        for c in 0..cfg.clusters {
            for t in 0..nodes {
                x_ref[cluster_col(c) + 2 * t] = p0[c * nodes + t];
            }
        }
        let flow_target = |e: usize, dir: usize| -> DVector<f64> {
            let fwd = DVector::from_column_slice(&[0.5 + 0.1 * e as f64, 0.1]);
            if dir == 0 {
                fwd
            } else {
                -fwd
            }
        };
        for e in 0..edge_count {
            for dir in 0..2 {
                let col = flow_col(e, dir);
                let f = flow_target(e, dir);
                x_ref[col] = f[0];
                x_ref[col + 1] = f[1];
            }
        }

        // Affine offsets m chosen so the reference point satisfies every
        // flow equation exactly.
        let mut flow_offsets = Vec::with_capacity(2 * edge_count);
        for e in 0..edge_count {
            for dir in 0..2 {
                let src = source_of(e, dir);
                let src_nodes = x_ref.rows(cluster_col(src), 2 * nodes).into_owned();
                let mut m = flow_target(e, dir) - &flow_maps[2 * e + dir] * src_nodes;
                if let Some((ie, idir)) = incoming_of(e, dir) {
                    m -= flow_target(ie, idir);
                }
                flow_offsets.push(m);
            }
        }

        // Assemble rows: voltage lower block, voltage upper block, flow
        // equations (forward then reverse per edge), consensus pairs.
        let mut a_mat = DMatrix::zeros(dim_c, dim_x);
        let mut b_mat = DMatrix::zeros(dim_c, dim_y);
        let mut rhs = DVector::zeros(dim_c);
        for g in 0..node_count {
            for j in 0..dim_x {
                a_mat[(g, j)] = voltage_sens[(g, j)];
                a_mat[(node_count + g, j)] = voltage_sens[(g, j)];
            }
            b_mat[(g, g)] = -1.0;
            b_mat[(node_count + g, node_count + g)] = 1.0;
            rhs[g] = cfg.v_min - v0[g];
            rhs[node_count + g] = cfg.v_max - v0[g];
        }
        let flow_row = |e: usize, dir: usize| 2 * node_count + 4 * e + 2 * dir;
        for e in 0..edge_count {
            for dir in 0..2 {
                let row = flow_row(e, dir);
                let src = source_of(e, dir);
                let map = &flow_maps[2 * e + dir];
                for comp in 0..2 {
                    a_mat[(row + comp, flow_col(e, dir) + comp)] = 1.0;
                    for j in 0..2 * nodes {
                        a_mat[(row + comp, cluster_col(src) + j)] = -map[(comp, j)];
                    }
                    if let Some((ie, idir)) = incoming_of(e, dir) {
                        a_mat[(row + comp, flow_col(ie, idir) + comp)] = -1.0;
                    }
                    rhs[row + comp] = flow_offsets[2 * e + dir][comp];
                }
            }
        }
        let cons_row = |e: usize| 2 * node_count + 4 * edge_count + 2 * e;
        for e in 0..edge_count {
            for comp in 0..2 {
                a_mat[(cons_row(e) + comp, flow_col(e, 0) + comp)] = 1.0;
                a_mat[(cons_row(e) + comp, flow_col(e, 1) + comp)] = 1.0;
            }
        }

        // Reference slacks make the voltage rows exact.
        let v_ref = &v0 + &voltage_sens * &x_ref;
        let mut y_ref = DVector::zeros(dim_y);
        for g in 0..node_count {
            y_ref[g] = v_ref[g] - cfg.v_min;
            y_ref[node_count + g] = cfg.v_max - v_ref[g];
        }

        Ok(Self {
            cfg: cfg.clone(),
            dim_x,
            dim_y,
            dim_c,
            node_count,
            edge_count,
            flow_offset,
            a_mat,
            b_mat,
            rhs,
            voltage_sens,
            v0,
            x_ref,
            y_ref,
        })
    }

    pub fn dim_x(&self) -> usize {
        self.dim_x
    }

    pub fn dim_y(&self) -> usize {
        self.dim_y
    }

    pub fn dim_constraints(&self) -> usize {
        self.dim_c
    }

    /// Engineered exactly-feasible point: full dispatch, zero reactive
    /// power, chain-consistent flows, and the matching voltage slacks.
    pub fn reference_point(&self) -> (DVector<f64>, DVector<f64>) {
        (self.x_ref.clone(), self.y_ref.clone())
    }

    /// Voltage profile of a dispatch vector under the affine model.
    pub fn voltage(&self, x: &DVector<f64>) -> Result<DVector<f64>, CoreError> {
        if x.len() != self.dim_x {
            return Err(CoreError::DimensionMismatch {
                what: "dispatch vector",
                expected: self.dim_x,
                got: x.len(),
            });
        }
        Ok(&self.v0 + &self.voltage_sens * x)
    }

    /// Snapshot for time step `k`.
    pub fn snapshot(&self, k: usize) -> Result<ProblemSnapshot, CoreError> {
        if k >= self.cfg.horizon {
            return Err(CoreError::Invalid {
                what: "dispatch time step",
                detail: String::from("beyond the configured horizon"),
            });
        }
        let cfg = &self.cfg;
        let nodes = cfg.nodes_per_cluster;
        let p_av = &cfg.p_available[k];
        let node_ridge = if cfg.regularize_nodes { 2.0 * FLOW_RIDGE } else { 0.0 };

        let mut diag = DVector::zeros(self.dim_x);
        let mut lin = DVector::zeros(self.dim_x);
        let mut constant = 0.0;
        let mut f0_parts: Vec<(core::ops::Range<usize>, Atom)> = Vec::new();
        for c in 0..cfg.clusters {
            for t in 0..nodes {
                let p_idx = c * 2 * nodes + 2 * t;
                let avail = p_av[c * nodes + t];
                diag[p_idx] = 2.0 * cfg.c_p + node_ridge;
                lin[p_idx] = -2.0 * cfg.c_p * avail;
                constant += cfg.c_p * avail * avail;
                diag[p_idx + 1] = 2.0 * cfg.c_q + node_ridge;
                f0_parts.push((
                    p_idx..p_idx + 1,
                    Atom::box_indicator(DVector::zeros(1), DVector::from_element(1, avail))?,
                ));
                let q_atom = if cfg.cbar_q > 0.0 {
                    Atom::weighted_l1(DVector::from_element(1, cfg.cbar_q))?
                } else {
                    Atom::Zero
                };
                f0_parts.push((p_idx + 1..p_idx + 2, q_atom));
            }
        }
        for j in self.flow_offset..self.dim_x {
            diag[j] = 2.0 * FLOW_RIDGE;
        }
        if self.edge_count > 0 {
            f0_parts.push((self.flow_offset..self.dim_x, Atom::Zero));
        }
        let f1 = SeparableFunction::quadratic(DMatrix::from_diagonal(&diag), lin, constant)?;
        let f0 = SeparableFunction::new(self.dim_x, f0_parts)?;

        let mut slack_diag = DVector::zeros(self.dim_y);
        for g in 0..self.node_count {
            slack_diag[g] = 2.0 * cfg.a_lo;
            slack_diag[self.node_count + g] = 2.0 * cfg.a_hi;
        }
        let g1 = SeparableFunction::quadratic(
            DMatrix::from_diagonal(&slack_diag),
            DVector::zeros(self.dim_y),
            0.0,
        )?;
        let g0 = SeparableFunction::new(self.dim_y, vec![(0..self.dim_y, Atom::Nonneg)])?;

        ProblemSnapshot::new(
            k as u64,
            f1,
            f0,
            g1,
            g0,
            self.a_mat.clone(),
            self.b_mat.clone(),
            self.rhs.clone(),
        )
    }

    /// All `horizon` snapshots.
    pub fn snapshots(&self) -> Result<Vec<ProblemSnapshot>, CoreError> {
        (0..self.cfg.horizon).map(|k| self.snapshot(k)).collect()
    }

    /// Constraint-violation indices of one dispatch vector.
    pub fn metrics_for(&self, x: &DVector<f64>) -> Result<OpfMetrics, CoreError> {
        let v = self.voltage(x)?;
        let mut voltage_violation = 0.0;
        for g in 0..self.node_count {
            voltage_violation +=
                (v[g] - self.cfg.v_max).max(0.0) + (self.cfg.v_min - v[g]).max(0.0);
        }
        let residual = &self.a_mat * x - &self.rhs;
        let flow_rows = 2 * self.node_count..2 * self.node_count + 4 * self.edge_count;
        let cons_rows =
            2 * self.node_count + 4 * self.edge_count..self.dim_c;
        let power_violation = residual.rows(flow_rows.start, flow_rows.len()).norm_squared();
        let consensus_violation = residual.rows(cons_rows.start, cons_rows.len()).norm_squared();
        Ok(OpfMetrics {
            voltage_violation,
            power_violation,
            consensus_violation,
        })
    }
}

fn validate(cfg: &OpfConfig) -> Result<(), CoreError> {
    let invalid = |what: &'static str, detail: &str| CoreError::Invalid {
        what,
        detail: String::from(detail),
    };
    if cfg.clusters == 0 || cfg.nodes_per_cluster == 0 {
        return Err(invalid(
            "dispatch dims",
            "clusters and nodes_per_cluster must be at least 1",
        ));
    }
    if cfg.horizon == 0 {
        return Err(invalid("dispatch horizon", "must be at least 1"));
    }
    for (name, v) in [
        ("c_p", cfg.c_p),
        ("c_q", cfg.c_q),
        ("cbar_q", cfg.cbar_q),
    ] {
        if !(v >= 0.0 && v.is_finite()) {
            return Err(CoreError::Invalid {
                what: "dispatch weights",
                detail: alloc::format!("{name} must be nonnegative and finite"),
            });
        }
    }
    if !cfg.regularize_nodes && (cfg.c_p == 0.0 || cfg.c_q == 0.0) {
        return Err(invalid(
            "dispatch weights",
            "zero c_p or c_q breaks strong convexity; enable regularize_nodes to allow it",
        ));
    }
    if !(cfg.a_lo > 0.0 && cfg.a_lo.is_finite() && cfg.a_hi > 0.0 && cfg.a_hi.is_finite()) {
        return Err(invalid("dispatch slack weights", "must be positive and finite"));
    }
    if !(cfg.v_min.is_finite() && cfg.v_max.is_finite() && cfg.v_min < cfg.v_max) {
        return Err(invalid("dispatch voltage band", "requires v_min < v_max"));
    }
    if cfg.p_available.len() != cfg.horizon {
        return Err(invalid(
            "dispatch p_available",
            "must provide one vector per time step",
        ));
    }
    let nodes = cfg.clusters * cfg.nodes_per_cluster;
    for p in &cfg.p_available {
        if p.len() != nodes {
            return Err(CoreError::DimensionMismatch {
                what: "p_available entry",
                expected: nodes,
                got: p.len(),
            });
        }
        if p.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(invalid(
                "dispatch p_available",
                "entries must be nonnegative and finite",
            ));
        }
    }
    Ok(())
}

/// Generates the full snapshot sequence of a dispatch config.
pub fn gen_opf(cfg: &OpfConfig) -> Result<Vec<ProblemSnapshot>, CoreError> {
    OpfModel::from_config(cfg)?.snapshots()
}

/// Per-step violation indices of a solver trajectory on this family.
pub fn opf_metrics(traj: &Trajectory, cfg: &OpfConfig) -> Result<Vec<OpfMetrics>, CoreError> {
    let model = OpfModel::from_config(cfg)?;
    traj.states().map(|s| model.metrics_for(&s.x)).collect()
}
