//! Bilinear saddle toy dynamics.
//!
//! For the saddle function `x' A lambda`, simultaneous gradient
//! descent/ascent
//!
//! ```text
//!   x+      = x - alpha * A * lambda
//!   lambda+ = lambda + beta * A' * x
//! ```
//!
//! spirals outward (every mode has modulus > 1), while the perturbed
//! variant
//!
//! ```text
//!   x+      = x - alpha * A * (1 - gamma*beta) * lambda
//!   lambda+ = (1 - gamma*beta) * lambda + beta * A' * x
//! ```
//!
//! damps the multiplier each step and contracts for suitable spectra. Both
//! updates read the previous iterate pair (simultaneous, not alternating).

use alloc::string::String;
use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::scenario::{gaussian_matrix, gaussian_vector};
use crate::CoreError;

/// Norm at which a trace is truncated and flagged as diverged, chosen far
/// below the overflow threshold so squared norms stay representable.
pub const TOY_OVERFLOW_NORM: f64 = 1e150;

/// Configuration for the saddle recursion.
///
/// When `a` is `None`, a `dim x dim` matrix with independent normal entries
/// of variance `1/dim` is drawn from `seed` (the scaling keeps the expected
/// squared column norm at 1, so spectra stay in a moderate band as `dim`
/// grows). When `start` is `None`, a unit-norm starting pair is drawn from
/// the same stream after the matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct ToyConfig {
    /// Explicit coupling matrix (rows act on `x`, columns on `lambda`).
    pub a: Option<DMatrix<f64>>,
    /// Dimension of the default square Gaussian matrix when `a` is `None`.
    pub dim: usize,
    pub alpha: f64,
    pub beta: f64,
    /// Multiplier damping strength; `0` recovers the unperturbed recursion.
    pub gamma: f64,
    pub steps: usize,
    pub seed: u64,
    /// Explicit starting pair `(x0, lambda0)`; seeded unit-norm by default.
    pub start: Option<(DVector<f64>, DVector<f64>)>,
}

impl ToyConfig {
    pub fn new(dim: usize, alpha: f64, beta: f64, gamma: f64, steps: usize, seed: u64) -> Self {
        Self {
            a: None,
            dim,
            alpha,
            beta,
            gamma,
            steps,
            seed,
            start: None,
        }
    }
}

/// One recorded iterate of the saddle recursion.
#[derive(Debug, Clone, PartialEq)]
pub struct ToyStep {
    pub x: DVector<f64>,
    pub lambda: DVector<f64>,
    /// Saddle objective `x' A lambda` at this iterate.
    pub objective: f64,
    /// Joint norm `||(x, lambda)||`.
    pub norm: f64,
}

/// Full trace of the recursion; entry 0 is the starting point.
#[derive(Debug, Clone, PartialEq)]
pub struct ToyTrace {
    pub steps: Vec<ToyStep>,
    /// True when the trace was truncated because the joint norm left the
    /// representable band (expected for the unperturbed recursion on long
    /// horizons).
    pub diverged: bool,
}

impl ToyTrace {
    pub fn norms(&self) -> Vec<f64> {
        self.steps.iter().map(|s| s.norm).collect()
    }

    pub fn initial_norm(&self) -> f64 {
        self.steps.first().map_or(0.0, |s| s.norm)
    }

    pub fn final_norm(&self) -> f64 {
        self.steps.last().map_or(0.0, |s| s.norm)
    }
}

fn validate(cfg: &ToyConfig) -> Result<(), CoreError> {
    let invalid = |what: &'static str, detail: &str| CoreError::Invalid {
        what,
        detail: String::from(detail),
    };
    if !(cfg.alpha > 0.0 && cfg.alpha.is_finite()) {
        return Err(invalid("toy alpha", "must be positive and finite"));
    }
    if !(cfg.beta > 0.0 && cfg.beta.is_finite()) {
        return Err(invalid("toy beta", "must be positive and finite"));
    }
    if !(cfg.gamma >= 0.0 && cfg.gamma.is_finite()) {
        return Err(invalid("toy gamma", "must be nonnegative and finite"));
    }
    if cfg.gamma > 0.0 && cfg.gamma * cfg.beta >= 1.0 {
        return Err(invalid(
            "toy gamma",
            "gamma*beta must be below 1 for the damped recursion",
        ));
    }
    if cfg.steps == 0 {
        return Err(invalid("toy steps", "must be at least 1"));
    }
    match &cfg.a {
        Some(a) => {
            if a.nrows() == 0 || a.ncols() == 0 {
                return Err(invalid("toy matrix", "must have at least one row and column"));
            }
            if a.iter().any(|v| !v.is_finite()) {
                return Err(CoreError::NonFinite { what: "toy matrix" });
            }
        }
        None => {
            if cfg.dim == 0 {
                return Err(invalid("toy dim", "must be at least 1 when no matrix is given"));
            }
        }
    }
    Ok(())
}

/// Runs the saddle recursion for `cfg.steps` steps and records every
/// iterate with its objective and joint norm. `perturbed` selects the
/// damped variant; both variants share one code path whose damping factor
/// is exactly `1.0` in the unperturbed case, so `gamma = 0` reproduces the
/// unperturbed trace bit for bit.
pub fn toy_run(cfg: &ToyConfig, perturbed: bool) -> Result<ToyTrace, CoreError> {
    validate(cfg)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let a = match &cfg.a {
        Some(a) => a.clone(),
        None => {
            let scale = 1.0 / libm::sqrt(cfg.dim as f64);
            gaussian_matrix(&mut rng, cfg.dim, cfg.dim, scale)
        }
    };
    let (dim_x, dim_lambda) = (a.nrows(), a.ncols());
    let (mut x, mut lambda) = match &cfg.start {
        Some((x0, l0)) => {
            if x0.len() != dim_x || l0.len() != dim_lambda {
                return Err(CoreError::DimensionMismatch {
                    what: "toy start",
                    expected: dim_x + dim_lambda,
                    got: x0.len() + l0.len(),
                });
            }
            (x0.clone(), l0.clone())
        }
        None => {
            let x0 = gaussian_vector(&mut rng, dim_x, 1.0);
            let l0 = gaussian_vector(&mut rng, dim_lambda, 1.0);
            let joint = libm::sqrt(x0.norm_squared() + l0.norm_squared());
            if joint > 1e-12 {
                (x0 / joint, l0 / joint)
            } else {
                let mut e = DVector::zeros(dim_x);
                e[0] = 1.0;
                (e, DVector::zeros(dim_lambda))
            }
        }
    };

    let factor = if perturbed { 1.0 - cfg.gamma * cfg.beta } else { 1.0 };
    let measure = |x: &DVector<f64>, lambda: &DVector<f64>, a: &DMatrix<f64>| {
        let objective = x.dot(&(a * lambda));
        let norm = libm::sqrt(x.norm_squared() + lambda.norm_squared());
        (objective, norm)
    };

    let mut trace = ToyTrace {
        steps: Vec::with_capacity(cfg.steps + 1),
        diverged: false,
    };
    let (objective, norm) = measure(&x, &lambda, &a);
    if !norm.is_finite() || norm > TOY_OVERFLOW_NORM {
        return Err(CoreError::NonFinite { what: "toy start" });
    }
    trace.steps.push(ToyStep {
        x: x.clone(),
        lambda: lambda.clone(),
        objective,
        norm,
    });

    for _ in 0..cfg.steps {
        // Simultaneous update: both lines read the previous pair.
        let x_next = &x - (&a * &lambda) * (cfg.alpha * factor);
        let lambda_next = &lambda * factor + a.tr_mul(&x) * cfg.beta;
        x = x_next;
        lambda = lambda_next;
        let (objective, norm) = measure(&x, &lambda, &a);
        if !norm.is_finite() || norm > TOY_OVERFLOW_NORM {
            trace.diverged = true;
            break;
        }
        trace.steps.push(ToyStep {
            x: x.clone(),
            lambda: lambda.clone(),
            objective,
            norm,
        });
    }
    Ok(trace)
}
