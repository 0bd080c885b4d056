//! Small dense linear-algebra helpers shared across modules.

use nalgebra::{DMatrix, DVector};

use crate::CoreError;

/// Largest singular value of a dense matrix (0 for an empty matrix).
pub fn spectral_norm(a: &DMatrix<f64>) -> f64 {
    if a.nrows() == 0 || a.ncols() == 0 {
        return 0.0;
    }
    a.clone().svd(false, false).singular_values.max()
}

/// Extreme eigenvalues `(min, max)` of a symmetric matrix.
pub fn symmetric_eigen_bounds(p: &DMatrix<f64>) -> (f64, f64) {
    if p.nrows() == 0 {
        return (0.0, 0.0);
    }
    if p.nrows() == 1 {
        let v = p[(0, 0)];
        return (v, v);
    }
    let eig = p.clone().symmetric_eigen();
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for &v in eig.eigenvalues.iter() {
        lo = lo.min(v);
        hi = hi.max(v);
    }
    (lo, hi)
}

/// Solves the square system `m z = rhs` by LU with partial pivoting.
pub fn lu_solve(m: DMatrix<f64>, rhs: &DVector<f64>) -> Result<DVector<f64>, CoreError> {
    m.lu().solve(rhs).ok_or(CoreError::SingularSystem)
}

/// True when every entry is finite.
pub fn all_finite(a: &DMatrix<f64>) -> bool {
    a.iter().all(|v| v.is_finite())
}

/// True when every component is finite.
pub fn vec_finite(v: &DVector<f64>) -> bool {
    v.iter().all(|x| x.is_finite())
}
