//! Curvature/drift profiles, solver parameters, the weighted analysis norm,
//! and step-size selection with an independent admissibility checker.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use nalgebra::DVector;

use crate::linalg;
use crate::problem::ProblemSnapshot;
use crate::CoreError;

/// Relative slack used when comparing step sizes against their admissible
/// windows, absorbing floating-point rounding between algebraically equal
/// expressions computed along different paths.
const WINDOW_SLACK: f64 = 1e-12;

fn leq(lhs: f64, rhs: f64) -> bool {
    lhs <= rhs * (1.0 + WINDOW_SLACK)
}

/// Uniform-in-time curvature, operator-norm, and drift bounds for a problem
/// sequence.
///
/// `v_f`/`v_g` bound the total strong convexity of the x/y costs from below;
/// `l_f`/`l_g` bound the gradient Lipschitz constants of the smooth parts
/// from above; `sigma_a`/`sigma_b` bound the coupling-matrix spectral norms.
/// `drift_a`/`drift_b` are the largest per-step spectral-norm changes of the
/// coupling matrices, `drift_rhs` the largest per-step change of the
/// right-hand side, and `drift_x`/`drift_y`/`drift_lambda` the largest
/// per-step movements of the tracked stationary point (filled in from oracle
/// trajectories, not from raw problem data).
#[derive(Debug, Clone, PartialEq)]
pub struct BoundsProfile {
    pub v_f: f64,
    pub v_g: f64,
    pub l_f: f64,
    pub l_g: f64,
    pub sigma_a: f64,
    pub sigma_b: f64,
    pub drift_a: f64,
    pub drift_b: f64,
    pub drift_rhs: f64,
    pub drift_x: f64,
    pub drift_y: f64,
    pub drift_lambda: f64,
    /// Uniform bound on the stationary dual norm, when known.
    pub dual_bound: Option<f64>,
    /// Uniform bounds on the stationary primal block norms, when known.
    pub primal_bounds: Option<(f64, f64)>,
}

impl BoundsProfile {
    /// Profile with the given curvature and operator-norm bounds, zero
    /// drifts, and no optional bounds.
    pub fn new(v_f: f64, v_g: f64, l_f: f64, l_g: f64, sigma_a: f64, sigma_b: f64) -> Self {
        Self {
            v_f,
            v_g,
            l_f,
            l_g,
            sigma_a,
            sigma_b,
            drift_a: 0.0,
            drift_b: 0.0,
            drift_rhs: 0.0,
            drift_x: 0.0,
            drift_y: 0.0,
            drift_lambda: 0.0,
            dual_bound: None,
            primal_bounds: None,
        }
    }

    pub fn validate(&self) -> Result<(), CoreError> {
        let nonneg = [
            ("l_f", self.l_f),
            ("l_g", self.l_g),
            ("sigma_a", self.sigma_a),
            ("sigma_b", self.sigma_b),
            ("drift_a", self.drift_a),
            ("drift_b", self.drift_b),
            ("drift_rhs", self.drift_rhs),
            ("drift_x", self.drift_x),
            ("drift_y", self.drift_y),
            ("drift_lambda", self.drift_lambda),
        ];
        for (name, v) in nonneg {
            if !(v.is_finite() && v >= 0.0) {
                return Err(CoreError::Invalid {
                    what: "bounds profile",
                    detail: format!("{name} must be finite and nonnegative, got {v}"),
                });
            }
        }
        if !(self.v_f.is_finite() && self.v_f > 0.0) {
            return Err(CoreError::ZeroCurvature { block: "x" });
        }
        if !(self.v_g.is_finite() && self.v_g > 0.0) {
            return Err(CoreError::ZeroCurvature { block: "y" });
        }
        if self.l_f > 0.0 && self.v_f > self.l_f * (1.0 + WINDOW_SLACK) {
            return Err(CoreError::Invalid {
                what: "bounds profile",
                detail: format!("v_f = {} exceeds l_f = {}", self.v_f, self.l_f),
            });
        }
        if self.l_g > 0.0 && self.v_g > self.l_g * (1.0 + WINDOW_SLACK) {
            return Err(CoreError::Invalid {
                what: "bounds profile",
                detail: format!("v_g = {} exceeds l_g = {}", self.v_g, self.l_g),
            });
        }
        if let Some(m) = self.dual_bound {
            if !(m.is_finite() && m > 0.0) {
                return Err(CoreError::Invalid {
                    what: "bounds profile",
                    detail: String::from("dual_bound must be finite and positive when set"),
                });
            }
        }
        if let Some((s1, s2)) = self.primal_bounds {
            if !(s1.is_finite() && s1 >= 0.0 && s2.is_finite() && s2 >= 0.0) {
                return Err(CoreError::Invalid {
                    what: "bounds profile",
                    detail: String::from("primal_bounds must be finite and nonnegative when set"),
                });
            }
        }
        Ok(())
    }
}

/// Step sizes and perturbation constants governing one solver run.
///
/// Constructed through [`SolverParams::new`], which enforces the conditions
/// that do not depend on a bounds profile: positive finite step sizes,
/// `0 < beta <= 1`, `gamma > 0`, `beta*gamma + beta <= 1`, and
/// `0 < delta <= beta*gamma`. Profile-dependent step-size windows are
/// verified by [`check_admissibility`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverParams {
    pub alpha1: f64,
    pub alpha2: f64,
    pub beta: f64,
    pub gamma: f64,
    pub delta: f64,
}

impl SolverParams {
    pub fn new(
        alpha1: f64,
        alpha2: f64,
        beta: f64,
        gamma: f64,
        delta: f64,
    ) -> Result<Self, CoreError> {
        for (name, v) in [("alpha1", alpha1), ("alpha2", alpha2)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(CoreError::Inadmissible {
                    detail: format!("{name} must be finite and positive, got {v}"),
                });
            }
        }
        if !(beta.is_finite() && beta > 0.0 && beta <= 1.0) {
            return Err(CoreError::Inadmissible {
                detail: format!("beta must lie in (0, 1], got {beta}"),
            });
        }
        if !(gamma.is_finite() && gamma > 0.0) {
            return Err(CoreError::Inadmissible {
                detail: format!("gamma must be finite and positive, got {gamma}"),
            });
        }
        if beta * gamma + beta > 1.0 + WINDOW_SLACK {
            return Err(CoreError::Inadmissible {
                detail: format!(
                    "beta*gamma + beta = {} exceeds 1",
                    beta * gamma + beta
                ),
            });
        }
        if !(delta.is_finite() && delta > 0.0) {
            return Err(CoreError::Inadmissible {
                detail: format!("delta must be finite and positive, got {delta}"),
            });
        }
        if !leq(delta, beta * gamma) {
            return Err(CoreError::Inadmissible {
                detail: format!("delta = {delta} exceeds beta*gamma = {}", beta * gamma),
            });
        }
        Ok(Self {
            alpha1,
            alpha2,
            beta,
            gamma,
            delta,
        })
    }

    /// Guaranteed per-iteration contraction factor of the G-norm error on a
    /// static problem: `(1 + delta)^(-1/2)`.
    pub fn contraction_factor(&self) -> f64 {
        1.0 / libm::sqrt(1.0 + self.delta)
    }
}

/// The block-diagonal weighted norm
/// `||w||_G = sqrt(||x||^2/alpha1 + ||y||^2/alpha2 + ||lambda||^2/beta)`
/// in which contraction and tracking statements are made.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GMetric {
    pub alpha1: f64,
    pub alpha2: f64,
    pub beta: f64,
}

impl GMetric {
    pub fn new(alpha1: f64, alpha2: f64, beta: f64) -> Result<Self, CoreError> {
        for (name, v) in [("alpha1", alpha1), ("alpha2", alpha2), ("beta", beta)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(CoreError::Invalid {
                    what: "g-metric",
                    detail: format!("{name} must be finite and positive, got {v}"),
                });
            }
        }
        Ok(Self {
            alpha1,
            alpha2,
            beta,
        })
    }

    pub fn from_params(p: &SolverParams) -> Self {
        Self {
            alpha1: p.alpha1,
            alpha2: p.alpha2,
            beta: p.beta,
        }
    }

    pub fn norm_sq(&self, x: &DVector<f64>, y: &DVector<f64>, lambda: &DVector<f64>) -> f64 {
        x.norm_squared() / self.alpha1
            + y.norm_squared() / self.alpha2
            + lambda.norm_squared() / self.beta
    }

    pub fn norm(&self, x: &DVector<f64>, y: &DVector<f64>, lambda: &DVector<f64>) -> f64 {
        libm::sqrt(self.norm_sq(x, y, lambda))
    }
}

/// Largest admissible x step size: `1/((1+beta*gamma)*sigma_a^2 + l_f^2/v_f)`.
fn alpha1_cap(bounds: &BoundsProfile, beta: f64, gamma: f64) -> f64 {
    let sa2 = bounds.sigma_a * bounds.sigma_a;
    1.0 / ((1.0 + beta * gamma) * sa2 + bounds.l_f * bounds.l_f / bounds.v_f)
}

/// Largest admissible y step size: `1/(2*beta^2*sigma_b^4/v_g + l_g^2/v_g)`.
fn alpha2_cap(bounds: &BoundsProfile, beta: f64) -> f64 {
    let sb2 = bounds.sigma_b * bounds.sigma_b;
    let sb4 = sb2 * sb2;
    1.0 / (2.0 * beta * beta * sb4 / bounds.v_g + bounds.l_g * bounds.l_g / bounds.v_g)
}

fn check_beta_gamma(beta: f64, gamma: f64) -> Result<(), CoreError> {
    if !(beta.is_finite() && beta > 0.0 && beta <= 1.0) {
        return Err(CoreError::Inadmissible {
            detail: format!("beta must lie in (0, 1], got {beta}"),
        });
    }
    if !(gamma.is_finite() && gamma > 0.0) {
        return Err(CoreError::Inadmissible {
            detail: format!("gamma must be finite and positive, got {gamma}"),
        });
    }
    if beta * gamma + beta > 1.0 + WINDOW_SLACK {
        return Err(CoreError::Inadmissible {
            detail: format!("beta*gamma + beta = {} exceeds 1", beta * gamma + beta),
        });
    }
    Ok(())
}

/// Chooses the largest admissible step sizes for the given damping pair and
/// the matching contraction constant
/// `delta = min(v_f*alpha1, v_g*alpha2/2, beta*gamma)`.
pub fn select_params(
    bounds: &BoundsProfile,
    beta: f64,
    gamma: f64,
) -> Result<SolverParams, CoreError> {
    bounds.validate()?;
    check_beta_gamma(beta, gamma)?;
    let den1 = (1.0 + beta * gamma) * bounds.sigma_a * bounds.sigma_a
        + bounds.l_f * bounds.l_f / bounds.v_f;
    if !(den1.is_finite() && den1 > 0.0) {
        return Err(CoreError::Invalid {
            what: "bounds profile",
            detail: String::from(
                "x step-size denominator vanishes; sigma_a or l_f must be positive",
            ),
        });
    }
    let sb2 = bounds.sigma_b * bounds.sigma_b;
    let sb4 = sb2 * sb2;
    let den2 = 2.0 * beta * beta * sb4 / bounds.v_g + bounds.l_g * bounds.l_g / bounds.v_g;
    if !(den2.is_finite() && den2 > 0.0) {
        return Err(CoreError::Invalid {
            what: "bounds profile",
            detail: String::from(
                "y step-size denominator vanishes; sigma_b or l_g must be positive",
            ),
        });
    }
    let alpha1 = 1.0 / den1;
    let alpha2 = 1.0 / den2;
    let delta = (bounds.v_f / den1)
        .min(bounds.v_g * bounds.v_g / (4.0 * beta * beta * sb4 + 2.0 * bounds.l_g * bounds.l_g))
        .min(beta * gamma);
    SolverParams::new(alpha1, alpha2, beta, gamma, delta)
}

/// Builds parameters around caller-chosen step sizes (for problems where the
/// worst-case caps are too conservative), with the largest contraction
/// constant the admissibility windows allow:
/// `delta = min(v_f*alpha1, v_g*alpha2/2, beta*gamma, cap-based delta)`.
pub fn manual_params(
    bounds: &BoundsProfile,
    alpha1: f64,
    alpha2: f64,
    beta: f64,
    gamma: f64,
) -> Result<SolverParams, CoreError> {
    bounds.validate()?;
    check_beta_gamma(beta, gamma)?;
    if !(alpha1.is_finite() && alpha1 > 0.0 && alpha2.is_finite() && alpha2 > 0.0) {
        return Err(CoreError::Inadmissible {
            detail: String::from("manual step sizes must be finite and positive"),
        });
    }
    let delta = (bounds.v_f * alpha1)
        .min(0.5 * bounds.v_g * alpha2)
        .min(beta * gamma);
    SolverParams::new(alpha1, alpha2, beta, gamma, delta)
}

/// Outcome of checking one parameter set against the feasibility conditions
/// that make the weighted-norm contraction argument go through (with the
/// canonical auxiliary-weight choices). `alpha*_window` fields hold the
/// inclusive `(lower, upper)` windows the step sizes must fall in.
#[derive(Debug, Clone, PartialEq)]
pub struct AdmissibilityReport {
    pub beta_ok: bool,
    pub damping_ok: bool,
    pub delta_ok: bool,
    pub alpha1_window: (f64, f64),
    pub alpha1_ok: bool,
    pub alpha2_window: (f64, f64),
    pub alpha2_ok: bool,
}

impl AdmissibilityReport {
    pub fn admissible(&self) -> bool {
        self.beta_ok && self.damping_ok && self.delta_ok && self.alpha1_ok && self.alpha2_ok
    }

    /// Human-readable list of violated conditions; empty when admissible.
    pub fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        if !self.beta_ok {
            out.push(String::from("beta exceeds 1"));
        }
        if !self.damping_ok {
            out.push(String::from("beta*gamma + beta exceeds 1"));
        }
        if !self.delta_ok {
            out.push(String::from("delta exceeds beta*gamma"));
        }
        if !self.alpha1_ok {
            out.push(format!(
                "alpha1 outside [{:e}, {:e}]",
                self.alpha1_window.0, self.alpha1_window.1
            ));
        }
        if !self.alpha2_ok {
            out.push(format!(
                "alpha2 outside [{:e}, {:e}]",
                self.alpha2_window.0, self.alpha2_window.1
            ));
        }
        out
    }
}

/// Independently re-derives the step-size windows from the bounds profile
/// and reports which feasibility conditions the given parameters satisfy.
///
/// With the canonical auxiliary weights (unit weights on the dual coupling
/// terms, `v_f`/`v_g` on the curvature terms, and `v_g/(2*beta*sigma_b^2)`
/// on the mixed y term), the conditions reduce to: `beta <= 1`,
/// `beta*gamma + beta <= 1`, `delta <= beta*gamma`,
/// `delta/v_f <= alpha1 <= alpha1_cap`, and
/// `2*delta/v_g <= alpha2 <= alpha2_cap`.
pub fn check_admissibility(
    bounds: &BoundsProfile,
    p: &SolverParams,
) -> Result<AdmissibilityReport, CoreError> {
    bounds.validate()?;
    let a1_hi = alpha1_cap(bounds, p.beta, p.gamma);
    let a2_hi = alpha2_cap(bounds, p.beta);
    let a1_lo = p.delta / bounds.v_f;
    let a2_lo = 2.0 * p.delta / bounds.v_g;
    Ok(AdmissibilityReport {
        beta_ok: p.beta <= 1.0,
        damping_ok: p.beta * p.gamma + p.beta <= 1.0 + WINDOW_SLACK,
        delta_ok: leq(p.delta, p.beta * p.gamma),
        alpha1_window: (a1_lo, a1_hi),
        alpha1_ok: leq(a1_lo, p.alpha1) && leq(p.alpha1, a1_hi),
        alpha2_window: (a2_lo, a2_hi),
        alpha2_ok: leq(a2_lo, p.alpha2) && leq(p.alpha2, a2_hi),
    })
}

/// Measures a [`BoundsProfile`] from a concrete snapshot sequence: smallest
/// total strong convexity and largest smooth-gradient Lipschitz constant per
/// block, largest coupling-matrix norms, and largest per-step data changes.
/// Stationary-point drifts are left at zero (they come from oracle
/// trajectories).
pub fn bounds_from_snapshots(snaps: &[ProblemSnapshot]) -> Result<BoundsProfile, CoreError> {
    let first = snaps.first().ok_or(CoreError::EmptySequence)?;
    let (m, n, l) = (first.dim_x(), first.dim_y(), first.dim_constraints());
    let mut v_f = f64::INFINITY;
    let mut v_g = f64::INFINITY;
    let mut l_f = 0.0_f64;
    let mut l_g = 0.0_f64;
    let mut sigma_a = 0.0_f64;
    let mut sigma_b = 0.0_f64;
    for s in snaps {
        if s.dim_x() != m {
            return Err(CoreError::DimensionMismatch {
                what: "snapshot x dimension",
                expected: m,
                got: s.dim_x(),
            });
        }
        if s.dim_y() != n {
            return Err(CoreError::DimensionMismatch {
                what: "snapshot y dimension",
                expected: n,
                got: s.dim_y(),
            });
        }
        if s.dim_constraints() != l {
            return Err(CoreError::DimensionMismatch {
                what: "snapshot constraint dimension",
                expected: l,
                got: s.dim_constraints(),
            });
        }
        let nu_f = (s.f0().strong_convexity_per_coord() + s.f1().strong_convexity_per_coord()).min();
        if nu_f <= 0.0 || nu_f.is_nan() {
            return Err(CoreError::ZeroCurvature { block: "x" });
        }
        let nu_g = (s.g0().strong_convexity_per_coord() + s.g1().strong_convexity_per_coord()).min();
        if nu_g <= 0.0 || nu_g.is_nan() {
            return Err(CoreError::ZeroCurvature { block: "y" });
        }
        v_f = v_f.min(nu_f);
        v_g = v_g.min(nu_g);
        l_f = l_f.max(s.f1().grad_lipschitz()?);
        l_g = l_g.max(s.g1().grad_lipschitz()?);
        sigma_a = sigma_a.max(linalg::spectral_norm(s.a()));
        sigma_b = sigma_b.max(linalg::spectral_norm(s.b()));
    }
    let mut drift_a = 0.0_f64;
    let mut drift_b = 0.0_f64;
    let mut drift_rhs = 0.0_f64;
    for pair in snaps.windows(2) {
        drift_a = drift_a.max(linalg::spectral_norm(&(pair[1].a() - pair[0].a())));
        drift_b = drift_b.max(linalg::spectral_norm(&(pair[1].b() - pair[0].b())));
        drift_rhs = drift_rhs.max((pair[1].rhs() - pair[0].rhs()).norm());
    }
    let profile = BoundsProfile {
        drift_a,
        drift_b,
        drift_rhs,
        ..BoundsProfile::new(v_f, v_g, l_f, l_g, sigma_a, sigma_b)
    };
    profile.validate()?;
    Ok(profile)
}
