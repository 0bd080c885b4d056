//! Convex function atoms and blockwise-separable combinations of them.
//!
//! A [`SeparableFunction`] is an ordered list of atoms, each owning a
//! contiguous coordinate range; the ranges partition the whole variable
//! vector. Smooth atoms (quadratic, zero) expose exact gradients; every atom
//! exposes an exact proximal map, where `prox` solves
//! `argmin_z 1/2 ||z - x||^2 + step * h(z)`.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::ops::Range;

use nalgebra::{DMatrix, DVector, DVectorView};

use crate::linalg;
use crate::CoreError;

/// Absolute tolerance under which a quadratic's smallest eigenvalue may dip
/// below zero and still count as positive semidefinite.
const PSD_TOLERANCE: f64 = 1e-10;

/// A quadratic piece `1/2 x'Px + q'x + r` with `P` symmetric PSD.
#[derive(Debug, Clone, PartialEq)]
pub struct Quadratic {
    p: DMatrix<f64>,
    q: DVector<f64>,
    r: f64,
    lambda_min: f64,
    lambda_max: f64,
}

impl Quadratic {
    /// Validates symmetry (to machine tolerance) and positive
    /// semidefiniteness (smallest eigenvalue at least `-1e-10`).
    pub fn new(p: DMatrix<f64>, q: DVector<f64>, r: f64) -> Result<Self, CoreError> {
        let d = p.nrows();
        if p.ncols() != d {
            return Err(CoreError::DimensionMismatch {
                what: "quadratic matrix (must be square)",
                expected: d,
                got: p.ncols(),
            });
        }
        if q.len() != d {
            return Err(CoreError::DimensionMismatch {
                what: "quadratic linear term",
                expected: d,
                got: q.len(),
            });
        }
        if !linalg::all_finite(&p) || !linalg::vec_finite(&q) || !r.is_finite() {
            return Err(CoreError::NonFinite {
                what: "quadratic coefficients",
            });
        }
        let scale = 1.0 + p.iter().fold(0.0_f64, |m, v| m.max(libm::fabs(*v)));
        for i in 0..d {
            for j in (i + 1)..d {
                if libm::fabs(p[(i, j)] - p[(j, i)]) > 1e-12 * scale {
                    return Err(CoreError::Invalid {
                        what: "quadratic matrix",
                        detail: String::from("not symmetric"),
                    });
                }
            }
        }
        let (lambda_min, lambda_max) = linalg::symmetric_eigen_bounds(&p);
        if lambda_min < -PSD_TOLERANCE {
            return Err(CoreError::Invalid {
                what: "quadratic matrix",
                detail: format!("not positive semidefinite (lambda_min = {lambda_min:e})"),
            });
        }
        Ok(Self {
            p,
            q,
            r,
            lambda_min,
            lambda_max,
        })
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.p
    }

    pub fn linear(&self) -> &DVector<f64> {
        &self.q
    }

    pub fn constant(&self) -> f64 {
        self.r
    }

    /// Strong convexity modulus: the smallest eigenvalue, floored at zero.
    pub fn strong_convexity(&self) -> f64 {
        self.lambda_min.max(0.0)
    }

    /// Gradient Lipschitz constant: the largest eigenvalue, floored at zero.
    pub fn grad_lipschitz(&self) -> f64 {
        self.lambda_max.max(0.0)
    }
}

/// One convex function piece over a contiguous coordinate block.
#[derive(Debug, Clone, PartialEq)]
pub enum Atom {
    /// `1/2 x'Px + q'x + r`, smooth.
    Quadratic(Quadratic),
    /// `sum_i w_i |x_i|` with `w >= 0`, nonsmooth.
    WeightedL1 { weights: DVector<f64> },
    /// Indicator of the box `[lower, upper]` (componentwise, infinite bounds
    /// allowed), nonsmooth.
    Box {
        lower: DVector<f64>,
        upper: DVector<f64>,
    },
    /// Indicator of the nonnegative orthant, nonsmooth.
    Nonneg,
    /// The identically-zero function, smooth.
    Zero,
}

impl Atom {
    /// Weighted-L1 atom; weights must be nonnegative and finite.
    pub fn weighted_l1(weights: DVector<f64>) -> Result<Self, CoreError> {
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(CoreError::Invalid {
                what: "l1 weights",
                detail: String::from("weights must be finite and nonnegative"),
            });
        }
        Ok(Atom::WeightedL1 { weights })
    }

    /// Box-indicator atom; requires `lower <= upper` componentwise and no NaN.
    pub fn box_indicator(lower: DVector<f64>, upper: DVector<f64>) -> Result<Self, CoreError> {
        if lower.len() != upper.len() {
            return Err(CoreError::DimensionMismatch {
                what: "box bounds",
                expected: lower.len(),
                got: upper.len(),
            });
        }
        for (lo, hi) in lower.iter().zip(upper.iter()) {
            if lo.is_nan() || hi.is_nan() || lo > hi {
                return Err(CoreError::Invalid {
                    what: "box bounds",
                    detail: String::from("requires lower <= upper, no NaN"),
                });
            }
        }
        Ok(Atom::Box { lower, upper })
    }

    /// Dimension this atom is pinned to, if any; `Nonneg` and `Zero` fit any
    /// block length.
    pub fn fixed_dim(&self) -> Option<usize> {
        match self {
            Atom::Quadratic(qa) => Some(qa.matrix().nrows()),
            Atom::WeightedL1 { weights } => Some(weights.len()),
            Atom::Box { lower, .. } => Some(lower.len()),
            Atom::Nonneg | Atom::Zero => None,
        }
    }

    pub fn is_smooth(&self) -> bool {
        matches!(self, Atom::Quadratic(_) | Atom::Zero)
    }

    /// Strong convexity modulus contributed on this atom's block.
    pub fn strong_convexity(&self) -> f64 {
        match self {
            Atom::Quadratic(qa) => qa.strong_convexity(),
            _ => 0.0,
        }
    }

    /// Gradient Lipschitz constant; `None` for nonsmooth atoms.
    pub fn grad_lipschitz(&self) -> Option<f64> {
        match self {
            Atom::Quadratic(qa) => Some(qa.grad_lipschitz()),
            Atom::Zero => Some(0.0),
            _ => None,
        }
    }

    fn eval(&self, x: DVectorView<'_, f64>) -> f64 {
        match self {
            Atom::Quadratic(qa) => {
                0.5 * (qa.matrix() * x).dot(&x) + qa.linear().dot(&x) + qa.constant()
            }
            Atom::WeightedL1 { weights } => x
                .iter()
                .zip(weights.iter())
                .map(|(v, w)| w * libm::fabs(*v))
                .sum(),
            Atom::Box { lower, upper } => {
                let inside = x
                    .iter()
                    .zip(lower.iter().zip(upper.iter()))
                    .all(|(v, (lo, hi))| *v >= *lo && *v <= *hi);
                if inside {
                    0.0
                } else {
                    f64::INFINITY
                }
            }
            Atom::Nonneg => {
                if x.iter().all(|v| *v >= 0.0) {
                    0.0
                } else {
                    f64::INFINITY
                }
            }
            Atom::Zero => 0.0,
        }
    }

    fn grad(&self, x: DVectorView<'_, f64>, out: &mut [f64]) -> Result<(), CoreError> {
        match self {
            Atom::Quadratic(qa) => {
                let g = qa.matrix() * x + qa.linear();
                out.copy_from_slice(g.as_slice());
                Ok(())
            }
            Atom::Zero => {
                out.fill(0.0);
                Ok(())
            }
            _ => Err(CoreError::NotSmooth { what: "gradient" }),
        }
    }

    fn prox(&self, x: DVectorView<'_, f64>, step: f64, out: &mut [f64]) -> Result<(), CoreError> {
        match self {
            Atom::Quadratic(qa) => {
                // argmin_z 1/2||z-x||^2 + step*(1/2 z'Pz + q'z + r)
                // => (I + step P) z = x - step q
                let d = x.len();
                let mut m = qa.matrix() * step;
                for i in 0..d {
                    m[(i, i)] += 1.0;
                }
                let rhs = DVector::from_fn(d, |i, _| x[i] - step * qa.linear()[i]);
                let z = linalg::lu_solve(m, &rhs)?;
                out.copy_from_slice(z.as_slice());
                Ok(())
            }
            Atom::WeightedL1 { weights } => {
                for ((o, v), w) in out.iter_mut().zip(x.iter()).zip(weights.iter()) {
                    let t = step * w;
                    let mag = (libm::fabs(*v) - t).max(0.0);
                    *o = if *v >= 0.0 { mag } else { -mag };
                }
                Ok(())
            }
            Atom::Box { lower, upper } => {
                for ((o, v), (lo, hi)) in out
                    .iter_mut()
                    .zip(x.iter())
                    .zip(lower.iter().zip(upper.iter()))
                {
                    *o = v.max(*lo).min(*hi);
                }
                Ok(())
            }
            Atom::Nonneg => {
                for (o, v) in out.iter_mut().zip(x.iter()) {
                    *o = v.max(0.0);
                }
                Ok(())
            }
            Atom::Zero => {
                out.copy_from_slice(x.as_slice());
                Ok(())
            }
        }
    }
}

/// A blockwise-separable convex function over a fixed-dimension vector.
#[derive(Debug, Clone, PartialEq)]
pub struct SeparableFunction {
    dim: usize,
    parts: Vec<(Range<usize>, Atom)>,
}

impl SeparableFunction {
    /// Builds a separable function from `(range, atom)` pairs. The ranges,
    /// after sorting, must partition `[0, dim)` exactly, and each atom with an
    /// intrinsic dimension must match its range length.
    pub fn new(dim: usize, mut parts: Vec<(Range<usize>, Atom)>) -> Result<Self, CoreError> {
        if dim == 0 {
            return Err(CoreError::Invalid {
                what: "separable function",
                detail: String::from("dimension must be positive"),
            });
        }
        parts.sort_by_key(|(r, _)| r.start);
        let mut cursor = 0usize;
        for (range, atom) in &parts {
            if range.start != cursor || range.end <= range.start {
                return Err(CoreError::BadPartition {
                    detail: format!(
                        "range {}..{} does not continue the cover at {}",
                        range.start, range.end, cursor
                    ),
                });
            }
            if let Some(d) = atom.fixed_dim() {
                if d != range.len() {
                    return Err(CoreError::DimensionMismatch {
                        what: "atom block",
                        expected: range.len(),
                        got: d,
                    });
                }
            }
            cursor = range.end;
        }
        if cursor != dim {
            return Err(CoreError::BadPartition {
                detail: format!("ranges cover [0, {cursor}) but the dimension is {dim}"),
            });
        }
        Ok(Self { dim, parts })
    }

    /// The identically-zero function on `R^dim`.
    pub fn zero(dim: usize) -> Self {
        Self::new(dim, alloc::vec![(0..dim, Atom::Zero)]).expect("positive dimension")
    }

    /// A single quadratic atom spanning the whole vector.
    pub fn quadratic(p: DMatrix<f64>, q: DVector<f64>, r: f64) -> Result<Self, CoreError> {
        let d = p.nrows();
        Self::new(d, alloc::vec![(0..d, Atom::Quadratic(Quadratic::new(p, q, r)?))])
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// The `(range, atom)` pairs in coordinate order.
    pub fn parts(&self) -> impl Iterator<Item = (&Range<usize>, &Atom)> {
        self.parts.iter().map(|(r, a)| (r, a))
    }

    pub fn is_smooth(&self) -> bool {
        self.parts.iter().all(|(_, a)| a.is_smooth())
    }

    fn check_dim(&self, x: &DVector<f64>, what: &'static str) -> Result<(), CoreError> {
        if x.len() != self.dim {
            return Err(CoreError::DimensionMismatch {
                what,
                expected: self.dim,
                got: x.len(),
            });
        }
        Ok(())
    }

    /// Extended-real value; `+inf` when an indicator atom is violated.
    pub fn eval(&self, x: &DVector<f64>) -> f64 {
        assert_eq!(x.len(), self.dim, "eval dimension mismatch");
        self.parts
            .iter()
            .map(|(r, a)| a.eval(x.rows(r.start, r.len())))
            .sum()
    }

    /// Exact gradient; errors if any atom is nonsmooth.
    pub fn grad(&self, x: &DVector<f64>) -> Result<DVector<f64>, CoreError> {
        self.check_dim(x, "gradient input")?;
        let mut out = DVector::zeros(self.dim);
        for (r, a) in &self.parts {
            a.grad(
                x.rows(r.start, r.len()),
                &mut out.as_mut_slice()[r.start..r.end],
            )?;
        }
        Ok(out)
    }

    /// Proximal map `argmin_z 1/2||z-x||^2 + step*f(z)`, assembled atomwise.
    pub fn prox(&self, x: &DVector<f64>, step: f64) -> Result<DVector<f64>, CoreError> {
        self.check_dim(x, "prox input")?;
        if !(step > 0.0 && step.is_finite()) {
            return Err(CoreError::Invalid {
                what: "prox step",
                detail: String::from("step must be positive and finite"),
            });
        }
        let mut out = DVector::zeros(self.dim);
        for (r, a) in &self.parts {
            a.prox(
                x.rows(r.start, r.len()),
                step,
                &mut out.as_mut_slice()[r.start..r.end],
            )?;
        }
        Ok(out)
    }

    /// Per-coordinate strong-convexity moduli (each atom's modulus spread
    /// over its block). Summing two functions' vectors and taking the minimum
    /// entry lower-bounds the curvature of their sum.
    pub fn strong_convexity_per_coord(&self) -> DVector<f64> {
        let mut out = DVector::zeros(self.dim);
        for (r, a) in &self.parts {
            let nu = a.strong_convexity();
            out.as_mut_slice()[r.start..r.end].fill(nu);
        }
        out
    }

    /// Largest gradient-Lipschitz constant across atoms; errors if any atom
    /// is nonsmooth.
    pub fn grad_lipschitz(&self) -> Result<f64, CoreError> {
        let mut l = 0.0_f64;
        for (_, a) in &self.parts {
            l = l.max(a.grad_lipschitz().ok_or(CoreError::NotSmooth {
                what: "Lipschitz bound",
            })?);
        }
        Ok(l)
    }

    /// Dense assembly `(P, q, r)` when every atom is quadratic or zero;
    /// `None` otherwise. Used by the direct oracle.
    pub fn as_quadratic(&self) -> Option<(DMatrix<f64>, DVector<f64>, f64)> {
        let mut p = DMatrix::zeros(self.dim, self.dim);
        let mut q = DVector::zeros(self.dim);
        let mut r = 0.0;
        for (range, a) in &self.parts {
            match a {
                Atom::Quadratic(qa) => {
                    p.view_mut((range.start, range.start), (range.len(), range.len()))
                        .copy_from(qa.matrix());
                    q.rows_mut(range.start, range.len()).copy_from(qa.linear());
                    r += qa.constant();
                }
                Atom::Zero => {}
                _ => return None,
            }
        }
        Some((p, q, r))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use nalgebra::{dmatrix, dvector};

    fn quad(p: DMatrix<f64>, q: DVector<f64>) -> SeparableFunction {
        SeparableFunction::quadratic(p, q, 0.0).unwrap()
    }

    #[test]
    fn gradient_of_identity_quadratic_is_the_point() {
        let f = quad(DMatrix::identity(2, 2), DVector::zeros(2));
        assert_eq!(f.grad(&dvector![1.0, 2.0]).unwrap(), dvector![1.0, 2.0]);
    }

    #[test]
    fn gradient_of_diagonal_quadratic_with_linear_term() {
        let f = quad(dmatrix![2.0, 0.0; 0.0, 4.0], dvector![1.0, -1.0]);
        assert_eq!(f.grad(&dvector![1.0, 1.0]).unwrap(), dvector![3.0, 3.0]);
    }

    #[test]
    fn gradient_of_zero_atom_vanishes() {
        let f = SeparableFunction::zero(3);
        assert_eq!(f.grad(&dvector![5.0, -2.0, 0.5]).unwrap(), DVector::zeros(3));
    }

    #[test]
    fn gradient_rejects_nonsmooth_atoms() {
        let f = SeparableFunction::new(
            2,
            vec![(0..2, Atom::weighted_l1(dvector![1.0, 1.0]).unwrap())],
        )
        .unwrap();
        assert!(matches!(
            f.grad(&dvector![1.0, 1.0]),
            Err(CoreError::NotSmooth { .. })
        ));
    }

    #[test]
    fn soft_threshold_matches_hand_values() {
        let f = SeparableFunction::new(
            1,
            vec![(0..1, Atom::weighted_l1(dvector![1.0]).unwrap())],
        )
        .unwrap();
        assert_eq!(f.prox(&dvector![3.0], 1.0).unwrap(), dvector![2.0]);

        let g = SeparableFunction::new(
            3,
            vec![(0..3, Atom::weighted_l1(dvector![1.0, 1.0, 1.0]).unwrap())],
        )
        .unwrap();
        assert_eq!(
            g.prox(&dvector![3.0, -1.0, 0.25], 0.5).unwrap(),
            dvector![2.5, -0.5, 0.0]
        );
    }

    #[test]
    fn box_projection_clamps_and_ignores_step() {
        let f = SeparableFunction::new(
            1,
            vec![(0..1, Atom::box_indicator(dvector![0.0], dvector![1.0]).unwrap())],
        )
        .unwrap();
        assert_eq!(f.prox(&dvector![1.7], 0.5).unwrap(), dvector![1.0]);
        assert_eq!(f.prox(&dvector![1.7], 3.0).unwrap(), dvector![1.0]);
        assert_eq!(f.prox(&dvector![-0.4], 0.5).unwrap(), dvector![0.0]);
    }

    #[test]
    fn zero_prox_is_identity_and_nonneg_prox_floors() {
        let z = SeparableFunction::zero(2);
        assert_eq!(z.prox(&dvector![7.0, -3.0], 2.0).unwrap(), dvector![7.0, -3.0]);
        let n = SeparableFunction::new(2, vec![(0..2, Atom::Nonneg)]).unwrap();
        assert_eq!(n.prox(&dvector![7.0, -3.0], 2.0).unwrap(), dvector![7.0, 0.0]);
    }

    #[test]
    fn quadratic_prox_solves_the_shifted_system() {
        // argmin 1/2(z-x)^2 + step*(1/2 z^2) => z = x/(1+step)
        let f = quad(DMatrix::identity(1, 1), DVector::zeros(1));
        let z = f.prox(&dvector![3.0], 0.5).unwrap();
        assert!((z[0] - 2.0).abs() < 1e-14);
    }

    #[test]
    fn eval_examples() {
        let f = quad(DMatrix::identity(2, 2), DVector::zeros(2));
        assert_eq!(f.eval(&dvector![3.0, 4.0]), 12.5);

        let b = SeparableFunction::new(
            1,
            vec![(0..1, Atom::box_indicator(dvector![0.0], dvector![1.0]).unwrap())],
        )
        .unwrap();
        assert_eq!(b.eval(&dvector![1.5]), f64::INFINITY);
        assert_eq!(b.eval(&dvector![0.5]), 0.0);

        let l = SeparableFunction::new(
            2,
            vec![(0..2, Atom::weighted_l1(dvector![1.0, 2.0]).unwrap())],
        )
        .unwrap();
        assert_eq!(l.eval(&dvector![-1.0, 1.0]), 3.0);
    }

    #[test]
    fn curvature_metadata_comes_from_eigenvalues() {
        let f = quad(dmatrix![1.0, 0.0; 0.0, 3.0], DVector::zeros(2));
        let (_, atom) = f.parts().next().map(|(r, a)| (r.clone(), a)).unwrap();
        assert!((atom.strong_convexity() - 1.0).abs() < 1e-12);
        assert!((atom.grad_lipschitz().unwrap() - 3.0).abs() < 1e-12);
    }

    #[test]
    fn indefinite_or_asymmetric_quadratics_are_rejected() {
        assert!(Quadratic::new(dmatrix![0.0, 1.0; 1.0, 0.0], DVector::zeros(2), 0.0).is_err());
        assert!(Quadratic::new(dmatrix![1.0, 0.5; 0.0, 1.0], DVector::zeros(2), 0.0).is_err());
        // within PSD tolerance: passes, curvature floored at zero
        let q = Quadratic::new(dmatrix![1e-12, 0.0; 0.0, 1.0], DVector::zeros(2), 0.0).unwrap();
        assert!(q.strong_convexity() >= 0.0);
    }

    #[test]
    fn invalid_bounds_and_weights_are_rejected() {
        assert!(Atom::box_indicator(dvector![1.0], dvector![0.0]).is_err());
        assert!(Atom::weighted_l1(dvector![-0.1]).is_err());
    }

    #[test]
    fn ranges_must_partition_exactly() {
        // gap
        assert!(SeparableFunction::new(
            3,
            vec![(0..1, Atom::Zero), (2..3, Atom::Zero)]
        )
        .is_err());
        // overlap
        assert!(SeparableFunction::new(
            3,
            vec![(0..2, Atom::Zero), (1..3, Atom::Zero)]
        )
        .is_err());
        // short cover
        assert!(SeparableFunction::new(3, vec![(0..2, Atom::Zero)]).is_err());
        // out-of-order input is fine once sorted
        assert!(SeparableFunction::new(
            3,
            vec![(1..3, Atom::Zero), (0..1, Atom::Zero)]
        )
        .is_ok());
    }

    #[test]
    fn quadratic_assembly_is_block_diagonal() {
        let f = SeparableFunction::new(
            3,
            vec![
                (
                    0..2,
                    Atom::Quadratic(
                        Quadratic::new(dmatrix![2.0, 1.0; 1.0, 2.0], dvector![1.0, 2.0], 0.5)
                            .unwrap(),
                    ),
                ),
                (2..3, Atom::Zero),
            ],
        )
        .unwrap();
        let (p, q, r) = f.as_quadratic().unwrap();
        assert_eq!(p, dmatrix![2.0, 1.0, 0.0; 1.0, 2.0, 0.0; 0.0, 0.0, 0.0]);
        assert_eq!(q, dvector![1.0, 2.0, 0.0]);
        assert_eq!(r, 0.5);

        let g = SeparableFunction::new(1, vec![(0..1, Atom::Nonneg)]).unwrap();
        assert!(g.as_quadratic().is_none());
    }
}
