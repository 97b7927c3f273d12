//! Thin bridges between `ndarray` storage and `nalgebra` factorizations.

use nalgebra::{DMatrix, DVector};
use ndarray::{Array1, Array2};

pub fn to_dmatrix(a: &Array2<f64>) -> DMatrix<f64> {
    DMatrix::from_fn(a.nrows(), a.ncols(), |i, j| a[[i, j]])
}

pub fn from_dmatrix(m: &DMatrix<f64>) -> Array2<f64> {
    Array2::from_shape_fn((m.nrows(), m.ncols()), |(i, j)| m[(i, j)])
}

/// Eigendecomposition of a symmetric matrix, eigenvalues sorted descending.
/// Returns (eigenvalues, eigenvectors-as-columns).
pub fn sym_eigen_desc(a: &Array2<f64>) -> (Array1<f64>, Array2<f64>) {
    let n = a.nrows();
    assert_eq!(n, a.ncols());
    let m = to_dmatrix(a);
    // Symmetrize to guard against tiny asymmetries from accumulation order.
    let m = (&m + m.transpose()) * 0.5;
    let eig = m.symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[j].partial_cmp(&eig.eigenvalues[i]).unwrap());
    let values = Array1::from_iter(order.iter().map(|&i| eig.eigenvalues[i]));
    let vectors = Array2::from_shape_fn((n, n), |(r, c)| eig.eigenvectors[(r, order[c])]);
    (values, vectors)
}

/// Solve a symmetric positive definite system via Cholesky.
pub fn solve_spd(a: &Array2<f64>, b: &Array1<f64>) -> Option<Array1<f64>> {
    let m = to_dmatrix(a);
    let rhs = DVector::from_iterator(b.len(), b.iter().copied());
    let chol = m.cholesky()?;
    let x = chol.solve(&rhs);
    Some(Array1::from_iter(x.iter().copied()))
}

/// Solve an SPD system, retrying with growing ridge on the diagonal if the
/// Cholesky factorization fails.
pub fn solve_spd_ridged(a: &Array2<f64>, b: &Array1<f64>) -> Array1<f64> {
    if let Some(x) = solve_spd(a, b) {
        return x;
    }
    let n = a.nrows();
    let scale = (0..n).map(|i| a[[i, i]].abs()).fold(0.0_f64, f64::max).max(1.0);
    let mut ridge = 1e-12 * scale;
    loop {
        let mut aa = a.clone();
        for i in 0..n {
            aa[[i, i]] += ridge;
        }
        if let Some(x) = solve_spd(&aa, b) {
            return x;
        }
        ridge *= 100.0;
        assert!(ridge.is_finite(), "ridged Cholesky failed to stabilize");
    }
}

/// Inverse of a symmetric positive definite matrix via Cholesky.
pub fn spd_inverse(a: &Array2<f64>) -> Option<Array2<f64>> {
    let m = to_dmatrix(a);
    let inv = m.cholesky()?.inverse();
    Some(from_dmatrix(&inv))
}

/// Inverse square root of a symmetric positive definite matrix.
/// Eigenvalues below `floor` (relative to the largest) are clamped.
pub fn spd_inv_sqrt(a: &Array2<f64>, floor: f64) -> Array2<f64> {
    let (vals, vecs) = sym_eigen_desc(a);
    let n = a.nrows();
    let vmax = vals[0].max(0.0);
    let mut out = Array2::zeros((n, n));
    for k in 0..n {
        let v = vals[k].max(vmax * floor).max(f64::MIN_POSITIVE);
        let s = 1.0 / v.sqrt();
        for i in 0..n {
            for j in 0..n {
                out[[i, j]] += s * vecs[[i, k]] * vecs[[j, k]];
            }
        }
    }
    out
}
