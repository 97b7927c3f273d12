//! Penalized-spline smoothing with GCV, for curves and for covariance
//! surfaces.
//!
//! The covariance smoother fits a tensor-product spline surface to the
//! off-diagonal entries of the raw covariance (the diagonal carries the
//! noise nugget), with the second-derivative penalty applied along rows and
//! columns. Degrees of freedom for GCV come from the usual sandwich
//! eigenvalue identity.

use crate::basis::BasisSystem;
use crate::error::{Error, Result};
use crate::linalg::{solve_spd_ridged, spd_inv_sqrt, sym_eigen_desc};
use ndarray::{Array1, Array2};

/// How smoothing parameters are chosen.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Smoothing {
    /// Generalized cross-validation over the built-in ladder.
    Gcv,
    Fixed(f64),
}

pub fn default_ladder() -> Vec<f64> {
    (-6..=6).map(|e| 10f64.powi(e)).collect()
}

/// Penalized least squares fit of `y` on the basis at a fixed lambda.
/// Returns basis coefficients.
pub fn penalized_fit(basis: &BasisSystem, y: &Array1<f64>, lambda: f64) -> Result<Array1<f64>> {
    let t = basis.grid.len();
    if y.len() != t {
        return Err(Error::dim(format!("response has {} points, grid has {t}", y.len())));
    }
    let b = &basis.design;
    let mut a = b.t().dot(b) + &(basis.penalty.mapv(|v| v * lambda));
    let scale = (0..basis.m).map(|i| a[[i, i]]).fold(0.0_f64, f64::max).max(1.0);
    for i in 0..basis.m {
        a[[i, i]] += 1e-10 * scale;
    }
    let rhs = b.t().dot(y);
    Ok(solve_spd_ridged(&a, &rhs))
}

/// Smooth a curve, choosing lambda by GCV when requested.
/// Returns (fitted values on the grid, chosen lambda).
pub fn smooth_curve(basis: &BasisSystem, y: &Array1<f64>, smoothing: Smoothing) -> Result<(Array1<f64>, f64)> {
    match smoothing {
        Smoothing::Fixed(lambda) => {
            let coef = penalized_fit(basis, y, lambda)?;
            Ok((basis.design.dot(&coef), lambda))
        }
        Smoothing::Gcv => {
            let t = basis.grid.len() as f64;
            let eigs = sandwich_eigenvalues(basis);
            let mut best = (f64::INFINITY, default_ladder()[0], None);
            for &lambda in &default_ladder() {
                let coef = penalized_fit(basis, y, lambda)?;
                let fitted = basis.design.dot(&coef);
                let rss: f64 = y.iter().zip(fitted.iter()).map(|(a, b)| (a - b).powi(2)).sum();
                let df: f64 = eigs.iter().map(|&d| 1.0 / (1.0 + lambda * d.max(0.0))).sum();
                if df >= t {
                    continue;
                }
                let gcv = t * rss / (t - df).powi(2);
                if gcv < best.0 {
                    best = (gcv, lambda, Some(fitted));
                }
            }
            let fitted = match best.2 {
                Some(f) => f,
                None => basis.design.dot(&penalized_fit(basis, y, default_ladder()[0])?),
            };
            Ok((fitted, best.1))
        }
    }
}

/// Eigenvalues of F^{-1/2} P F^{-1/2} with F = B'B; the hat-matrix trace at
/// penalty lambda is sum 1/(1 + lambda d).
fn sandwich_eigenvalues(basis: &BasisSystem) -> Vec<f64> {
    let f = basis.design.t().dot(&basis.design);
    let f_inv_sqrt = spd_inv_sqrt(&f, 1e-12);
    let e = f_inv_sqrt.dot(&basis.penalty).dot(&f_inv_sqrt);
    let (vals, _) = sym_eigen_desc(&e);
    vals.to_vec()
}

pub struct SmoothedCovariance {
    pub surface: Array2<f64>,
    pub lambda: f64,
    /// Mean of (raw - smoothed) diagonal, truncated at zero.
    pub noise_var: f64,
}

/// Smooth a raw covariance matrix with the diagonal excluded from the fit.
pub fn smooth_covariance(
    basis: &BasisSystem,
    raw: &Array2<f64>,
    smoothing: Smoothing,
) -> Result<SmoothedCovariance> {
    let t = basis.grid.len();
    if raw.nrows() != t || raw.ncols() != t {
        return Err(Error::dim(format!(
            "covariance is {}x{}, grid has {t} points",
            raw.nrows(),
            raw.ncols()
        )));
    }
    let m = basis.m;
    let mm = m * m;
    let b = &basis.design;
    let f = b.t().dot(b);
    let p = &basis.penalty;

    // Sparse row support of the design: entries outside a window of
    // degree + 1 consecutive functions are zero.
    let supports: Vec<Vec<(usize, f64)>> = (0..t)
        .map(|j| {
            (0..m)
                .filter(|&i| b[[j, i]].abs() > 0.0)
                .map(|i| (i, b[[j, i]]))
                .collect()
        })
        .collect();

    // Normal matrix over off-diagonal points: F (x) F - sum_j u_j u_j'
    // with u_j = b_j (x) b_j, in row-major vec convention.
    let mut base = Array2::<f64>::zeros((mm, mm));
    for a in 0..m {
        for c in 0..m {
            let fac = f[[a, c]];
            if fac == 0.0 {
                continue;
            }
            for bb in 0..m {
                for d in 0..m {
                    base[[a * m + bb, c * m + d]] += fac * f[[bb, d]];
                }
            }
        }
    }
    for j in 0..t {
        let sup = &supports[j];
        for &(a, va) in sup {
            for &(bb, vb) in sup {
                let u_ab = va * vb;
                for &(c, vc) in sup {
                    for &(d, vd) in sup {
                        base[[a * m + bb, c * m + d]] -= u_ab * vc * vd;
                    }
                }
            }
        }
    }

    // Row-and-column penalty P (x) F + F (x) P.
    let mut pen = Array2::<f64>::zeros((mm, mm));
    for a in 0..m {
        for c in 0..m {
            for bb in 0..m {
                for d in 0..m {
                    pen[[a * m + bb, c * m + d]] = p[[a, c]] * f[[bb, d]] + f[[a, c]] * p[[bb, d]];
                }
            }
        }
    }

    // Right-hand side: vec(B'CB - sum_j C_jj b_j b_j').
    let mut rhs_mat = b.t().dot(raw).dot(b);
    for j in 0..t {
        let cjj = raw[[j, j]];
        for &(a, va) in &supports[j] {
            for &(bb, vb) in &supports[j] {
                rhs_mat[[a, bb]] -= cjj * va * vb;
            }
        }
    }
    let rhs = Array1::from_iter(rhs_mat.iter().copied());

    let scale = (0..mm).map(|i| base[[i, i]].abs()).fold(0.0_f64, f64::max).max(1.0);
    let solve_at = |lambda: f64| -> Array2<f64> {
        let mut a = &base + &pen.mapv(|v| v * lambda);
        for i in 0..mm {
            a[[i, i]] += 1e-10 * scale;
        }
        let g = solve_spd_ridged(&a, &rhs);
        let mut gm = Array2::from_shape_fn((m, m), |(r, c)| g[r * m + c]);
        gm = (&gm + &gm.t()) * 0.5;
        gm
    };

    let chosen = match smoothing {
        Smoothing::Fixed(lambda) => lambda,
        Smoothing::Gcv => {
            let eigs = sandwich_eigenvalues(basis);
            let n_off = (t * (t - 1)) as f64;
            let mut best = (f64::INFINITY, default_ladder()[0]);
            for &lambda in &default_ladder() {
                let gm = solve_at(lambda);
                let fitted = b.dot(&gm).dot(&b.t());
                let mut rss = 0.0;
                for j in 0..t {
                    for l in 0..t {
                        if j != l {
                            rss += (raw[[j, l]] - fitted[[j, l]]).powi(2);
                        }
                    }
                }
                let mut df = 0.0;
                for &da in &eigs {
                    for &db in &eigs {
                        df += 1.0 / (1.0 + lambda * (da.max(0.0) + db.max(0.0)));
                    }
                }
                if df >= n_off {
                    continue;
                }
                let gcv = n_off * rss / (n_off - df).powi(2);
                if gcv < best.0 {
                    best = (gcv, lambda);
                }
            }
            best.1
        }
    };

    let gm = solve_at(chosen);
    let surface = b.dot(&gm).dot(&b.t());
    let mut noise = 0.0;
    for j in 0..t {
        noise += raw[[j, j]] - surface[[j, j]];
    }
    noise /= t as f64;
    Ok(SmoothedCovariance {
        surface,
        lambda: chosen,
        noise_var: noise.max(0.0),
    })
}
