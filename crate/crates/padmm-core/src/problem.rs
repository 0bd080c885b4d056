//! One time-slice of the time-varying problem
//! `min_{x,y} f1(x) + f0(x) + g1(y) + g0(y)  s.t.  A x + B y = b`.

use alloc::string::String;

use nalgebra::{DMatrix, DVector};

use crate::atoms::SeparableFunction;
use crate::linalg;
use crate::CoreError;

/// Immutable problem data revealed at one time step.
///
/// `f1` and `g1` are the smooth costs (exact gradients required); `f0` and
/// `g0` are the prox-friendly costs (indicators, l1, or further quadratics).
/// `A` is `l x m`, `B` is `l x n`, and `b` has length `l`, where `m`/`n` are
/// the `x`/`y` dimensions and `l` the number of coupling rows.
#[derive(Debug, Clone, PartialEq)]
pub struct ProblemSnapshot {
    time_index: u64,
    f1: SeparableFunction,
    f0: SeparableFunction,
    g1: SeparableFunction,
    g0: SeparableFunction,
    a: DMatrix<f64>,
    b: DMatrix<f64>,
    rhs: DVector<f64>,
}

impl ProblemSnapshot {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        time_index: u64,
        f1: SeparableFunction,
        f0: SeparableFunction,
        g1: SeparableFunction,
        g0: SeparableFunction,
        a: DMatrix<f64>,
        b: DMatrix<f64>,
        rhs: DVector<f64>,
    ) -> Result<Self, CoreError> {
        if !f1.is_smooth() {
            return Err(CoreError::Invalid {
                what: "f1",
                detail: String::from("the smooth x-cost must contain only smooth atoms"),
            });
        }
        if !g1.is_smooth() {
            return Err(CoreError::Invalid {
                what: "g1",
                detail: String::from("the smooth y-cost must contain only smooth atoms"),
            });
        }
        let m = f1.dim();
        let n = g1.dim();
        if f0.dim() != m {
            return Err(CoreError::DimensionMismatch {
                what: "f0 dimension",
                expected: m,
                got: f0.dim(),
            });
        }
        if g0.dim() != n {
            return Err(CoreError::DimensionMismatch {
                what: "g0 dimension",
                expected: n,
                got: g0.dim(),
            });
        }
        if a.ncols() != m {
            return Err(CoreError::DimensionMismatch {
                what: "A columns",
                expected: m,
                got: a.ncols(),
            });
        }
        if b.ncols() != n {
            return Err(CoreError::DimensionMismatch {
                what: "B columns",
                expected: n,
                got: b.ncols(),
            });
        }
        let l = a.nrows();
        if l == 0 {
            return Err(CoreError::Invalid {
                what: "coupling rows",
                detail: String::from("at least one coupling row is required"),
            });
        }
        if b.nrows() != l {
            return Err(CoreError::DimensionMismatch {
                what: "B rows",
                expected: l,
                got: b.nrows(),
            });
        }
        if rhs.len() != l {
            return Err(CoreError::DimensionMismatch {
                what: "b length",
                expected: l,
                got: rhs.len(),
            });
        }
        if !linalg::all_finite(&a) || !linalg::all_finite(&b) || !linalg::vec_finite(&rhs) {
            return Err(CoreError::NonFinite {
                what: "coupling data",
            });
        }
        Ok(Self {
            time_index,
            f1,
            f0,
            g1,
            g0,
            a,
            b,
            rhs,
        })
    }

    pub fn time_index(&self) -> u64 {
        self.time_index
    }

    pub fn f1(&self) -> &SeparableFunction {
        &self.f1
    }

    pub fn f0(&self) -> &SeparableFunction {
        &self.f0
    }

    pub fn g1(&self) -> &SeparableFunction {
        &self.g1
    }

    pub fn g0(&self) -> &SeparableFunction {
        &self.g0
    }

    pub fn a(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn b(&self) -> &DMatrix<f64> {
        &self.b
    }

    pub fn rhs(&self) -> &DVector<f64> {
        &self.rhs
    }

    pub fn dim_x(&self) -> usize {
        self.f1.dim()
    }

    pub fn dim_y(&self) -> usize {
        self.g1.dim()
    }

    pub fn dim_constraints(&self) -> usize {
        self.rhs.len()
    }

    /// `A x + B y - b`.
    pub fn constraint_residual(&self, x: &DVector<f64>, y: &DVector<f64>) -> DVector<f64> {
        &self.a * x + &self.b * y - &self.rhs
    }

    /// Total objective `f1 + f0 + g1 + g0`, extended-real.
    pub fn objective(&self, x: &DVector<f64>, y: &DVector<f64>) -> f64 {
        self.f1.eval(x) + self.f0.eval(x) + self.g1.eval(y) + self.g0.eval(y)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::atoms::Atom;
    use alloc::vec;
    use nalgebra::{dmatrix, dvector, DMatrix, DVector};

    fn scalar_snapshot() -> ProblemSnapshot {
        ProblemSnapshot::new(
            0,
            SeparableFunction::quadratic(DMatrix::identity(1, 1), DVector::zeros(1), 0.0).unwrap(),
            SeparableFunction::zero(1),
            SeparableFunction::quadratic(DMatrix::identity(1, 1), DVector::zeros(1), 0.0).unwrap(),
            SeparableFunction::zero(1),
            dmatrix![1.0],
            dmatrix![1.0],
            dvector![2.0],
        )
        .unwrap()
    }

    #[test]
    fn residual_and_objective_hand_values() {
        let s = scalar_snapshot();
        let r = s.constraint_residual(&dvector![0.5], &dvector![0.25]);
        assert_eq!(r, dvector![-1.25]);
        assert_eq!(s.objective(&dvector![2.0], &dvector![3.0]), 2.0 + 4.5);
    }

    #[test]
    fn nonsmooth_f1_is_rejected() {
        let l1 = SeparableFunction::new(
            1,
            vec![(0..1, Atom::weighted_l1(dvector![1.0]).unwrap())],
        )
        .unwrap();
        let err = ProblemSnapshot::new(
            0,
            l1,
            SeparableFunction::zero(1),
            SeparableFunction::zero(1),
            SeparableFunction::zero(1),
            dmatrix![1.0],
            dmatrix![1.0],
            dvector![0.0],
        );
        assert!(err.is_err());
    }

    #[test]
    fn dimension_mismatches_are_rejected() {
        // A has 2 columns but x-costs are 1-dimensional
        let bad_a = ProblemSnapshot::new(
            0,
            SeparableFunction::zero(1),
            SeparableFunction::zero(1),
            SeparableFunction::zero(1),
            SeparableFunction::zero(1),
            dmatrix![1.0, 0.0],
            dmatrix![1.0],
            dvector![0.0],
        );
        assert!(bad_a.is_err());

        // rhs length disagrees with row count
        let bad_rhs = ProblemSnapshot::new(
            0,
            SeparableFunction::zero(1),
            SeparableFunction::zero(1),
            SeparableFunction::zero(1),
            SeparableFunction::zero(1),
            dmatrix![1.0],
            dmatrix![1.0],
            dvector![0.0, 1.0],
        );
        assert!(bad_rhs.is_err());

        // f0 dimension disagrees with f1
        let bad_f0 = ProblemSnapshot::new(
            0,
            SeparableFunction::zero(2),
            SeparableFunction::zero(1),
            SeparableFunction::zero(1),
            SeparableFunction::zero(1),
            dmatrix![1.0, 0.0],
            dmatrix![1.0],
            dvector![0.0],
        );
        assert!(bad_f0.is_err());
    }
}
