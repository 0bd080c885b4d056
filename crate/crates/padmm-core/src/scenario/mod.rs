//! Seeded scenario generators.
//!
//! Three families, all pure functions of their configs:
//!
//! * [`toy`] — the motivating bilinear saddle recursion whose unperturbed
//!   form diverges and whose perturbed form contracts.
//! * [`drifting_qp`] — strongly convex quadratic (optionally plus weighted
//!   L1) streams whose data drifts smoothly in time.
//! * [`opf`] — a synthetic multi-area grid-dispatch family with voltage
//!   slacks, inter-area flows, and consensus coupling.

pub mod drifting_qp;
pub mod opf;
pub mod toy;

pub use drifting_qp::{gen_drifting_qp, DriftKind, DriftingQpConfig, DRIFT_PERIOD};
pub use opf::{gen_opf, opf_metrics, OpfConfig, OpfMetrics, OpfModel};
pub use toy::{toy_run, ToyConfig, ToyStep, ToyTrace};

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

/// Matrix with independent normal entries of standard deviation `scale`.
pub(crate) fn gaussian_matrix<R: Rng>(rng: &mut R, rows: usize, cols: usize, scale: f64) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| scale * rng.sample::<f64, _>(StandardNormal))
}

/// Vector with independent normal entries of standard deviation `scale`.
pub(crate) fn gaussian_vector<R: Rng>(rng: &mut R, dim: usize, scale: f64) -> DVector<f64> {
    DVector::from_fn(dim, |_, _| scale * rng.sample::<f64, _>(StandardNormal))
}

/// Unit-norm direction vector; falls back to the first basis vector for the
/// (measure-zero) degenerate draw.
pub(crate) fn unit_direction<R: Rng>(rng: &mut R, dim: usize) -> DVector<f64> {
    let v = gaussian_vector(rng, dim, 1.0);
    let norm = v.norm();
    if norm > 1e-12 {
        v / norm
    } else {
        let mut e = DVector::zeros(dim);
        e[0] = 1.0;
        e
    }
}
