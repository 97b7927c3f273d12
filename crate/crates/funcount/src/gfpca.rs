//! Gaussian FPCA on log(Y + 1)-transformed count curves.
//!
//! The pipeline: spline-smoothed mean, smoothed covariance of the centered
//! log data (diagonal excluded, so the nugget stays out of the surface),
//! eigendecomposition under trapezoid quadrature, quadrature score
//! projection, and back-transformed fitted values.

use crate::basis::build_basis;
use crate::decomposition::{Decomposition, Method};
use crate::error::{Error, Result};
use crate::ingest::CountCurveSet;
use crate::linalg::sym_eigen_desc;
use crate::quad::trapezoid_weights;
use crate::smooth::{smooth_covariance, smooth_curve, Smoothing};
use ndarray::{Array1, Array2, ArrayView2, Axis};

#[derive(Debug, Clone)]
pub struct GfpcaOptions {
    pub k: usize,
    /// Spline basis dimension for mean and covariance smoothing.
    pub basis_dim: usize,
    pub degree: usize,
    pub smoothing: Smoothing,
}

impl Default for GfpcaOptions {
    fn default() -> Self {
        Self {
            k: 6,
            basis_dim: 30,
            degree: 3,
            smoothing: Smoothing::Gcv,
        }
    }
}

/// The Gaussian FPCA machinery on an arbitrary real matrix of curves.
/// Shared between GFPCA (log counts) and the PFPCA second step (estimated
/// log intensities).
pub(crate) struct GaussianCore {
    pub mean: Array1<f64>,
    /// K x T, orthonormal under trapezoid quadrature on the grid.
    pub components: Array2<f64>,
    /// Descending, truncated at zero.
    pub eigenvalues: Vec<f64>,
    /// N x K quadrature projections of the centered curves; exact zero
    /// column means by construction.
    pub scores: Array2<f64>,
    pub noise_var: f64,
}

pub(crate) fn gaussian_core(
    z: &Array2<f64>,
    grid: &[f64],
    opts: &GfpcaOptions,
) -> Result<GaussianCore> {
    let (n, t) = (z.nrows(), z.ncols());
    if grid.len() != t {
        return Err(Error::dim(format!("grid has {} points, curves have {t}", grid.len())));
    }
    if opts.k < 1 {
        return Err(Error::invalid("number of components must be at least 1"));
    }
    if opts.k > (n - 1).min(t) {
        return Err(Error::invalid(format!(
            "k = {} exceeds min(N-1, T) = {}",
            opts.k,
            (n - 1).min(t)
        )));
    }
    let basis = build_basis(grid, opts.basis_dim.min(t), opts.degree)?;
    let col_mean: Array1<f64> = z.mean_axis(Axis(0)).expect("nonempty matrix");
    let (smoothed_mean, _) = smooth_curve(&basis, &col_mean, opts.smoothing)?;

    // Covariance of the exactly-centered data.
    let mut centered = z.clone();
    for i in 0..n {
        for j in 0..t {
            centered[[i, j]] -= col_mean[j];
        }
    }
    let raw_cov = centered.t().dot(&centered).mapv(|v| v / n as f64);
    let smoothed = smooth_covariance(&basis, &raw_cov, opts.smoothing)?;

    // Quadrature-weighted eigenproblem: eigenfunctions orthonormal under the
    // trapezoid inner product.
    let w = trapezoid_weights(grid);
    let ws = w.mapv(f64::sqrt);
    let mut s = smoothed.surface.clone();
    for a in 0..t {
        for b in 0..t {
            s[[a, b]] *= ws[a] * ws[b];
        }
    }
    let (vals, vecs) = sym_eigen_desc(&s);
    let mut components = Array2::zeros((opts.k, t));
    let mut eigenvalues = Vec::with_capacity(opts.k);
    for k in 0..opts.k {
        eigenvalues.push(vals[k].max(0.0));
        let mut phi: Array1<f64> = (0..t).map(|j| vecs[[j, k]] / ws[j]).collect();
        // Deterministic sign: the largest-magnitude value is positive.
        let (mut arg, mut best) = (0, 0.0);
        for (j, &v) in phi.iter().enumerate() {
            if v.abs() > best {
                best = v.abs();
                arg = j;
            }
        }
        if phi[arg] < 0.0 {
            phi.mapv_inplace(|v| -v);
        }
        components.row_mut(k).assign(&phi);
    }

    // Scores: projections of the centered curves. Centering with the exact
    // column mean keeps score column means at zero; the reported mean curve
    // absorbs the smoothed-mean offset along each component so that
    // projecting against it reproduces these scores.
    let mut scores = Array2::zeros((n, opts.k));
    for k in 0..opts.k {
        let weighted: Array1<f64> = (0..t).map(|j| w[j] * components[[k, j]]).collect();
        let col = centered.dot(&weighted);
        scores.column_mut(k).assign(&col);
    }
    let mut mean = smoothed_mean.clone();
    for k in 0..opts.k {
        let offset: f64 = (0..t)
            .map(|j| w[j] * (col_mean[j] - smoothed_mean[j]) * components[[k, j]])
            .sum();
        for j in 0..t {
            mean[j] += offset * components[[k, j]];
        }
    }

    Ok(GaussianCore {
        mean,
        components,
        eigenvalues,
        scores,
        noise_var: smoothed.noise_var,
    })
}

/// Fit Gaussian FPCA to count curves via the log(Y + 1) transform.
pub fn fit_gfpca(data: &CountCurveSet, opts: &GfpcaOptions) -> Result<Decomposition> {
    let z = data.counts.mapv(|c| (c as f64 + 1.0).ln());
    let core = gaussian_core(&z, &data.grid, opts)?;
    let n = data.n_subjects();
    let t = data.n_times();
    let eta = core.scores.dot(&core.components);
    let fitted = Array2::from_shape_fn((n, t), |(i, j)| {
        ((core.mean[j] + eta[[i, j]]).exp() - 1.0).max(0.0)
    });
    Ok(Decomposition {
        method: Method::Gfpca,
        subject_ids: data.subject_ids.clone(),
        grid: data.grid.clone(),
        mean: Some(core.mean),
        components: core.components,
        scores: core.scores,
        eigenvalues: Some(core.eigenvalues),
        noise_var: Some(core.noise_var),
        fitted,
        converged: true,
    })
}

/// Project new observation-scale curves onto a fitted GFPCA basis.
pub fn project_scores(decomp: &Decomposition, new_curves: ArrayView2<f64>) -> Result<Array2<f64>> {
    if decomp.method != Method::Gfpca {
        return Err(Error::invalid("project_scores requires a GFPCA decomposition"));
    }
    let t = decomp.grid.len();
    if new_curves.ncols() != t {
        return Err(Error::dim(format!(
            "curves have {} points, decomposition grid has {t}",
            new_curves.ncols()
        )));
    }
    let mean = decomp.mean.as_ref().expect("GFPCA always has a mean");
    let w = trapezoid_weights(&decomp.grid);
    let k = decomp.n_components();
    let mut scores = Array2::zeros((new_curves.nrows(), k));
    for i in 0..new_curves.nrows() {
        for c in 0..k {
            let mut acc = 0.0;
            for j in 0..t {
                let z = (new_curves[[i, j]] + 1.0).ln() - mean[j];
                acc += w[j] * z * decomp.components[[c, j]];
            }
            scores[[i, c]] = acc;
        }
    }
    Ok(scores)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quad::{five_min_grid, inner};
    use crate::simulate::{gaussian_to_counts, orthonormalize, simulate_gaussian};
    use ndarray::array;

    fn curve_set(counts: Array2<u64>) -> CountCurveSet {
        let t = counts.ncols();
        let ids = (0..counts.nrows()).map(|i| format!("s{i}")).collect();
        CountCurveSet::new(ids, five_min_grid(t), counts).unwrap()
    }

    fn small_opts(k: usize) -> GfpcaOptions {
        GfpcaOptions {
            k,
            basis_dim: 12,
            degree: 3,
            smoothing: Smoothing::Gcv,
        }
    }

    #[test]
    fn identical_rows_give_zero_eigenvalues_and_near_exact_fit() {
        let t = 40;
        // a smooth shared curve, so the smoothed mean can track it
        let row: Vec<u64> = (0..t)
            .map(|j| (8.0 + 4.0 * (j as f64 / 6.0).sin()).round() as u64)
            .collect();
        let counts = Array2::from_shape_fn((6, t), |(_, j)| row[j]);
        let decomp = fit_gfpca(&curve_set(counts.clone()), &small_opts(2)).unwrap();
        for &ev in decomp.eigenvalues.as_ref().unwrap() {
            assert!(ev.abs() < 1e-8, "eigenvalue {ev}");
        }
        for &s in decomp.scores.iter() {
            assert!(s.abs() < 1e-6, "score {s}");
        }
        // fitted close to input (mean smoothing wiggle allowed)
        for i in 0..6 {
            for j in 0..t {
                assert!(
                    (decomp.fitted[[i, j]] - counts[[i, j]] as f64).abs() < 0.6,
                    "fitted {} vs {}",
                    decomp.fitted[[i, j]],
                    counts[[i, j]]
                );
            }
        }
    }

    #[test]
    fn two_point_closed_form_recovery() {
        // z1 = mean + u, z2 = mean - u: the single component is u up to
        // scale and the scores are +/- the quadrature norm of u.
        let t = 50;
        let grid = five_min_grid(t);
        let w = crate::quad::trapezoid_weights(&grid);
        let span = grid[t - 1] - grid[0];
        let u_raw = Array2::from_shape_fn((1, t), |(_, j)| {
            1.0 + 0.6 * (2.0 * std::f64::consts::PI * (grid[j] - grid[0]) / span).sin()
        });
        let u = orthonormalize(u_raw.view(), &grid);
        let scale = 0.4; // |score| on each side
        let mean_log = 5.0; // high intensity keeps count rounding negligible
        let counts = Array2::from_shape_fn((2, t), |(i, j)| {
            let sign = if i == 0 { 1.0 } else { -1.0 };
            let z: f64 = mean_log + sign * scale * u[[0, j]];
            (z.exp() - 1.0).max(0.0).round() as u64
        });
        // round-trip through counts adds rounding error, so compare loosely
        let decomp = fit_gfpca(&curve_set(counts), &small_opts(1)).unwrap();
        let phi = decomp.components.row(0);
        let alignment = inner(&w, phi, u.row(0)).abs();
        assert!(alignment > 0.99, "|<phi, u>| = {alignment}");
        let s0 = decomp.scores[[0, 0]];
        let s1 = decomp.scores[[1, 0]];
        assert!(s0 * s1 < 0.0, "scores should have opposite signs: {s0}, {s1}");
        assert!((s0.abs() - scale).abs() < 0.08, "score magnitude {}", s0.abs());
    }

    #[test]
    fn components_are_orthonormal_and_eigenvalues_sorted() {
        let t = 60;
        let grid = five_min_grid(t);
        let span = grid[t - 1] - grid[0];
        let raw = Array2::from_shape_fn((2, t), |(k, j)| {
            let x = (grid[j] - grid[0]) / span;
            if k == 0 { (2.0 * std::f64::consts::PI * x).sin() } else { (4.0 * std::f64::consts::PI * x).cos() }
        });
        let comps = orthonormalize(raw.view(), &grid);
        let mean = Array1::from_elem(t, 2.5);
        let z = simulate_gaussian(mean.view(), comps.view(), &[0.8, 0.4], 0.1, 80, 7).unwrap();
        let counts = gaussian_to_counts(&z);
        let decomp = fit_gfpca(&curve_set(counts), &small_opts(4)).unwrap();
        let w = crate::quad::trapezoid_weights(&grid);
        for a in 0..4 {
            for b in 0..4 {
                let g = inner(&w, decomp.components.row(a), decomp.components.row(b));
                let expect = if a == b { 1.0 } else { 0.0 };
                assert!((g - expect).abs() < 1e-6, "gram[{a},{b}] = {g}");
            }
        }
        let evs = decomp.eigenvalues.as_ref().unwrap();
        for k in 1..evs.len() {
            assert!(evs[k] <= evs[k - 1] + 1e-12);
            assert!(evs[k] >= 0.0);
        }
        // training score columns are centered
        for c in 0..4 {
            let m = decomp.scores.column(c).mean().unwrap();
            assert!(m.abs() < 1e-8, "score column {c} mean {m}");
        }
    }

    #[test]
    fn projection_is_consistent_with_training() {
        let t = 40;
        let grid = five_min_grid(t);
        let span = grid[t - 1] - grid[0];
        let raw = Array2::from_shape_fn((1, t), |(_, j)| {
            ((grid[j] - grid[0]) / span * std::f64::consts::PI).sin()
        });
        let comps = orthonormalize(raw.view(), &grid);
        let mean = Array1::from_elem(t, 2.0);
        let z = simulate_gaussian(mean.view(), comps.view(), &[0.5], 0.05, 30, 9).unwrap();
        let counts = gaussian_to_counts(&z);
        let set = curve_set(counts.clone());
        let decomp = fit_gfpca(&set, &small_opts(2)).unwrap();

        // project the training data
        let obs = counts.mapv(|c| c as f64);
        let projected = project_scores(&decomp, obs.view()).unwrap();
        for (a, b) in projected.iter().zip(decomp.scores.iter()) {
            assert!((a - b).abs() < 1e-8, "{a} vs {b}");
        }

        // project the mean curve itself: zero scores
        let mean_curve = decomp.mean.as_ref().unwrap();
        let mean_obs = Array2::from_shape_fn((1, t), |(_, j)| (mean_curve[j].exp() - 1.0).max(0.0));
        let zero = project_scores(&decomp, mean_obs.view()).unwrap();
        for &s in zero.iter() {
            assert!(s.abs() < 1e-8, "mean projection {s}");
        }

        // project mean + 2 sqrt(lambda_1) phi_1
        let lam1 = decomp.eigenvalues.as_ref().unwrap()[0];
        let shifted = Array2::from_shape_fn((1, t), |(_, j)| {
            ((mean_curve[j] + 2.0 * lam1.sqrt() * decomp.components[[0, j]]).exp() - 1.0).max(0.0)
        });
        let s = project_scores(&decomp, shifted.view()).unwrap();
        assert!((s[[0, 0]] - 2.0 * lam1.sqrt()).abs() < 1e-8);
        for c in 1..decomp.n_components() {
            assert!(s[[0, c]].abs() < 1e-8);
        }
    }

    #[test]
    fn reconstruction_error_nonincreasing_in_k() {
        let t = 50;
        let grid = five_min_grid(t);
        let span = grid[t - 1] - grid[0];
        let raw = Array2::from_shape_fn((3, t), |(k, j)| {
            let x = (grid[j] - grid[0]) / span;
            ((k + 1) as f64 * 2.0 * std::f64::consts::PI * x).sin()
        });
        let comps = orthonormalize(raw.view(), &grid);
        let mean = Array1::from_elem(t, 2.2);
        let z = simulate_gaussian(mean.view(), comps.view(), &[0.7, 0.4, 0.2], 0.1, 60, 13).unwrap();
        let counts = gaussian_to_counts(&z);
        let set = curve_set(counts.clone());
        let zlog = counts.mapv(|c| (c as f64 + 1.0).ln());
        let w = crate::quad::trapezoid_weights(&grid);
        let mut previous = f64::INFINITY;
        for k in 1..=4 {
            let decomp = fit_gfpca(&set, &small_opts(k)).unwrap();
            let mean_hat = decomp.mean.as_ref().unwrap();
            let eta = decomp.scores.dot(&decomp.components);
            let mut err = 0.0;
            for i in 0..set.n_subjects() {
                for j in 0..t {
                    let r = zlog[[i, j]] - mean_hat[j] - eta[[i, j]];
                    err += w[j] * r * r;
                }
            }
            assert!(err <= previous + 1e-8, "error rose from {previous} to {err} at k={k}");
            previous = err;
        }
    }

    #[test]
    fn k_bounds_are_enforced() {
        let counts = array![[1u64, 2, 3, 4], [2, 3, 4, 5], [0, 1, 1, 2]];
        let set = CountCurveSet::new(
            vec!["a".into(), "b".into(), "c".into()],
            vec![0.0, 1.0, 2.0, 3.0],
            counts,
        )
        .unwrap();
        let mut opts = small_opts(0);
        opts.basis_dim = 4;
        assert!(fit_gfpca(&set, &opts).is_err());
        opts.k = 3; // exceeds N-1 = 2
        assert!(fit_gfpca(&set, &opts).is_err());
    }
}
