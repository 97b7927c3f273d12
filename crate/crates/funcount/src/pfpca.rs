//! Poisson FPCA with a log link, fit by a three-stage pipeline:
//!
//! 1. per-subject penalized Poisson spline regression estimates each latent
//!    log-intensity curve (penalized Newton/IRLS; one shared smoothing
//!    parameter picked by working-scale GCV over a 10-point ladder);
//! 2. the Gaussian FPCA machinery is applied to the estimated log-intensity
//!    matrix to obtain the mean and components;
//! 3. each subject's scores are re-estimated by unpenalized Poisson
//!    regression of the counts on the components with the mean as offset.

use crate::basis::{build_basis, BasisSystem};
use crate::decomposition::{Decomposition, Method};
use crate::error::{Error, Result};
use crate::gfpca::{gaussian_core, GfpcaOptions};
use crate::ingest::CountCurveSet;
use crate::linalg::solve_spd_ridged;
use crate::smooth::Smoothing;
use ndarray::{Array1, Array2, ArrayView1, ArrayView2};
use rayon::prelude::*;

#[derive(Debug, Clone)]
pub struct PfpcaOptions {
    pub k: usize,
    pub basis_dim: usize,
    pub degree: usize,
    /// Smoothing for the step-2 eigendecomposition machinery.
    pub smoothing: Smoothing,
    /// Step-1 smoothing: shared lambda, or GCV over the ladder below.
    pub step1_lambda: Option<f64>,
    pub max_iter: usize,
}

impl Default for PfpcaOptions {
    fn default() -> Self {
        Self {
            k: 6,
            basis_dim: 30,
            degree: 3,
            smoothing: Smoothing::Gcv,
            step1_lambda: None,
            max_iter: 100,
        }
    }
}

/// Fixed log-spaced ladder for the shared step-1 smoothing parameter.
pub fn step1_ladder() -> Vec<f64> {
    (0..10).map(|i| 10f64.powf(-3.0 + i as f64)).collect()
}

const ETA_CAP: f64 = 30.0;

fn penalized_objective(
    y: &Array1<f64>,
    basis: &BasisSystem,
    beta: &Array1<f64>,
    lambda: f64,
) -> f64 {
    let eta = basis.design.dot(beta);
    let mut ll = 0.0;
    for j in 0..y.len() {
        let e = eta[j].min(ETA_CAP);
        ll += y[j] * e - e.exp();
    }
    ll - 0.5 * lambda * beta.dot(&basis.penalty.dot(beta))
}

/// Penalized Poisson spline fit of one count curve; returns the spline
/// coefficients of the estimated log intensity.
fn fit_subject_curve(
    y: &Array1<f64>,
    basis: &BasisSystem,
    lambda: f64,
    max_iter: usize,
    start: Option<&Array1<f64>>,
) -> (Array1<f64>, bool) {
    let m = basis.m;
    let mut beta = match start {
        Some(b) => b.clone(),
        None => {
            // warm start from a penalized least squares fit to log(y + 1)
            let target: Array1<f64> = y.mapv(|v| (v + 1.0).ln());
            let mut a = basis.design.t().dot(&basis.design) + &basis.penalty.mapv(|v| v * lambda);
            for i in 0..m {
                a[[i, i]] += 1e-8;
            }
            solve_spd_ridged(&a, &basis.design.t().dot(&target))
        }
    };
    let mut obj = penalized_objective(y, basis, &beta, lambda);
    let mut converged = false;
    for _ in 0..max_iter {
        let eta = basis.design.dot(&beta);
        let mu = eta.mapv(|e| e.min(ETA_CAP).exp());
        let grad = basis.design.t().dot(&(y - &mu)) - basis.penalty.dot(&beta).mapv(|v| v * lambda);
        let mut h = Array2::zeros((m, m));
        for j in 0..y.len() {
            let wj = mu[j];
            if wj == 0.0 {
                continue;
            }
            for a in 0..m {
                let ba = basis.design[[j, a]];
                if ba == 0.0 {
                    continue;
                }
                for b in 0..m {
                    h[[a, b]] += wj * ba * basis.design[[j, b]];
                }
            }
        }
        h += &basis.penalty.mapv(|v| v * lambda);
        for i in 0..m {
            h[[i, i]] += 1e-8; // ridge keeps all-zero subjects solvable
        }
        let delta = solve_spd_ridged(&h, &grad);
        // Steps that look flat at double precision still count as accepted:
        // near the optimum the objective cannot resolve the improvement even
        // though the Newton iterate keeps converging.
        let slack = 1e-12 * (1.0 + obj.abs());
        let mut step = 1.0;
        let mut accepted = false;
        for _ in 0..40 {
            let cand = &beta + &delta.mapv(|v| v * step);
            let cand_obj = penalized_objective(y, basis, &cand, lambda);
            if cand_obj.is_finite() && cand_obj >= obj - slack {
                let rel_change = (cand_obj - obj).abs() / (1.0 + obj.abs());
                let max_delta = delta.iter().fold(0.0_f64, |acc, &d| acc.max((d * step).abs()));
                beta = cand;
                obj = cand_obj.max(obj);
                accepted = true;
                if max_delta < 1e-8 || rel_change < 1e-10 {
                    converged = true;
                }
                break;
            }
            step *= 0.5;
        }
        if !accepted {
            // no uphill step found: treat the current point as the optimum
            converged = true;
        }
        if converged {
            break;
        }
    }
    (beta, converged)
}

/// Step-1 estimate of a single subject's log-intensity curve on the grid.
pub fn estimate_log_intensity(
    curve: &[u64],
    basis: &BasisSystem,
    lambda: f64,
) -> Result<Array1<f64>> {
    if curve.len() != basis.grid.len() {
        return Err(Error::dim(format!(
            "curve has {} points, basis grid has {}",
            curve.len(),
            basis.grid.len()
        )));
    }
    let y: Array1<f64> = curve.iter().map(|&v| v as f64).collect();
    let (beta, converged) = fit_subject_curve(&y, basis, lambda, 200, None);
    if !converged {
        return Err(Error::NonConvergence {
            context: "penalized Poisson spline fit".into(),
            iterations: 200,
            last: beta.to_vec(),
        });
    }
    Ok(basis.design.dot(&beta))
}

/// Working-scale GCV for one subject at a converged fit.
fn subject_gcv(y: &Array1<f64>, basis: &BasisSystem, beta: &Array1<f64>, lambda: f64) -> f64 {
    let t = y.len() as f64;
    let eta = basis.design.dot(beta);
    let mu = eta.mapv(|e| e.min(ETA_CAP).exp().max(1e-10));
    // weighted working-residual sum of squares: sum (y - mu)^2 / mu
    let rss: f64 = (0..y.len()).map(|j| (y[j] - mu[j]).powi(2) / mu[j]).sum();
    // df = tr[(B'WB + lambda P)^-1 B'WB]
    let m = basis.m;
    let mut bwb = Array2::zeros((m, m));
    for j in 0..y.len() {
        for a in 0..m {
            let ba = basis.design[[j, a]];
            if ba == 0.0 {
                continue;
            }
            for b in 0..m {
                bwb[[a, b]] += mu[j] * ba * basis.design[[j, b]];
            }
        }
    }
    let mut reg = &bwb + &basis.penalty.mapv(|v| v * lambda);
    for i in 0..m {
        reg[[i, i]] += 1e-8;
    }
    let mut df = 0.0;
    for c in 0..m {
        let col = bwb.column(c).to_owned();
        let x = solve_spd_ridged(&reg, &col);
        df += x[c];
    }
    if df >= t {
        return f64::INFINITY;
    }
    t * rss / (t - df).powi(2)
}

struct Step1Fit {
    log_intensity: Array2<f64>,
    lambda: f64,
    diverged: Vec<String>,
}

fn step1(data: &CountCurveSet, basis: &BasisSystem, opts: &PfpcaOptions) -> Step1Fit {
    let n = data.n_subjects();
    let rows: Vec<Array1<f64>> = (0..n)
        .map(|i| data.counts.row(i).mapv(|v| v as f64))
        .collect();

    let lambda = match opts.step1_lambda {
        Some(l) => l,
        None => {
            // shared lambda minimizing total working-scale GCV
            let ladder = step1_ladder();
            let scores: Vec<f64> = ladder
                .par_iter()
                .map(|&lam| {
                    rows.iter()
                        .map(|y| {
                            let (beta, _) = fit_subject_curve(y, basis, lam, opts.max_iter, None);
                            subject_gcv(y, basis, &beta, lam)
                        })
                        .sum()
                })
                .collect();
            let best = scores
                .iter()
                .enumerate()
                .min_by(|a, b| a.1.partial_cmp(b.1).unwrap())
                .map(|(i, _)| i)
                .unwrap_or(0);
            ladder[best]
        }
    };

    let fits: Vec<(Array1<f64>, bool)> = rows
        .par_iter()
        .map(|y| fit_subject_curve(y, basis, lambda, opts.max_iter, None))
        .collect();
    let t = data.n_times();
    let mut log_intensity = Array2::zeros((n, t));
    let mut diverged = Vec::new();
    for (i, (beta, ok)) in fits.iter().enumerate() {
        log_intensity.row_mut(i).assign(&basis.design.dot(beta));
        if !ok {
            diverged.push(data.subject_ids[i].clone());
        }
    }
    Step1Fit {
        log_intensity,
        lambda,
        diverged,
    }
}

/// Poisson log-likelihood (up to the log y! constant) and its gradient for
/// the score vector `s` with linear predictor mean + s'phi.
pub fn score_objective(
    curve: &[u64],
    mean: ArrayView1<f64>,
    components: ArrayView2<f64>,
    s: &[f64],
) -> (f64, Vec<f64>) {
    let t = curve.len();
    let k = components.nrows();
    assert_eq!(mean.len(), t, "mean length mismatch");
    assert_eq!(components.ncols(), t, "component length mismatch");
    assert_eq!(s.len(), k, "score length mismatch");
    let mut ll = 0.0;
    let mut grad = vec![0.0; k];
    for j in 0..t {
        let mut eta = mean[j];
        for c in 0..k {
            eta += s[c] * components[[c, j]];
        }
        let mu = eta.min(ETA_CAP).exp();
        let y = curve[j] as f64;
        ll += y * eta - mu;
        for c in 0..k {
            grad[c] += (y - mu) * components[[c, j]];
        }
    }
    (ll, grad)
}

/// Maximum-likelihood scores for one curve given mean and components
/// (unpenalized Poisson log-link regression with the mean as offset).
pub fn estimate_scores_poisson(
    curve: &[u64],
    mean: ArrayView1<f64>,
    components: ArrayView2<f64>,
) -> Result<Array1<f64>> {
    let t = curve.len();
    let k = components.nrows();
    if mean.len() != t || components.ncols() != t {
        return Err(Error::dim("curve, mean, and components must share the grid"));
    }
    let max_iter = 100;
    let mut s = vec![0.0; k];
    let (mut obj, mut grad) = score_objective(curve, mean, components, &s);
    let grad_tol = 5e-8;
    for _ in 0..max_iter {
        let sup = grad.iter().fold(0.0_f64, |a, &g| a.max(g.abs()));
        if sup <= grad_tol {
            return Ok(Array1::from(s));
        }
        // Newton step: H = -sum_j mu_j phi_j phi_j'
        let mut h = Array2::zeros((k, k));
        for j in 0..t {
            let mut eta = mean[j];
            for c in 0..k {
                eta += s[c] * components[[c, j]];
            }
            let mu = eta.min(ETA_CAP).exp();
            for a in 0..k {
                for b in 0..k {
                    h[[a, b]] += mu * components[[a, j]] * components[[b, j]];
                }
            }
        }
        let scale = (0..k).map(|i| h[[i, i]]).fold(0.0_f64, f64::max).max(1.0);
        for i in 0..k {
            h[[i, i]] += 1e-12 * scale;
        }
        let delta = solve_spd_ridged(&h, &Array1::from(grad.clone()));
        let slack = 1e-12 * (1.0 + obj.abs());
        let mut step = 1.0;
        let mut improved = false;
        for _ in 0..60 {
            let cand: Vec<f64> = s.iter().zip(delta.iter()).map(|(&v, &d)| v + step * d).collect();
            let (cand_obj, cand_grad) = score_objective(curve, mean, components, &cand);
            if cand_obj.is_finite() && cand_obj >= obj - slack {
                s = cand;
                obj = cand_obj.max(obj);
                grad = cand_grad;
                improved = true;
                break;
            }
            step *= 0.5;
        }
        if !improved {
            break;
        }
    }
    let sup = grad.iter().fold(0.0_f64, |a, &g| a.max(g.abs()));
    if sup <= 1e-6 {
        Ok(Array1::from(s))
    } else {
        Err(Error::NonConvergence {
            context: "Poisson score estimation".into(),
            iterations: max_iter,
            last: s,
        })
    }
}

/// Fit Poisson FPCA to count curves.
pub fn fit_pfpca(data: &CountCurveSet, opts: &PfpcaOptions) -> Result<Decomposition> {
    let n = data.n_subjects();
    let t = data.n_times();
    if opts.k < 1 {
        return Err(Error::invalid("number of components must be at least 1"));
    }
    if n < 2 || opts.k > (n - 1).min(t) {
        return Err(Error::invalid(format!(
            "k = {} exceeds min(N-1, T) = {}",
            opts.k,
            n.saturating_sub(1).min(t)
        )));
    }
    let basis = build_basis(&data.grid, opts.basis_dim.min(t), opts.degree)?;
    let s1 = step1(data, &basis, opts);
    let mut diverged = s1.diverged;

    let core_opts = GfpcaOptions {
        k: opts.k,
        basis_dim: opts.basis_dim,
        degree: opts.degree,
        smoothing: opts.smoothing,
    };
    let core = gaussian_core(&s1.log_intensity, &data.grid, &core_opts)?;

    // Step 3: per-subject ML score refit with the mean as offset.
    let refits: Vec<std::result::Result<Array1<f64>, Array1<f64>>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let row: Vec<u64> = data.counts.row(i).to_vec();
            match estimate_scores_poisson(&row, core.mean.view(), core.components.view()) {
                Ok(s) => Ok(s),
                Err(Error::NonConvergence { last, .. }) => Err(Array1::from(last)),
                Err(_) => Err(Array1::zeros(opts.k)),
            }
        })
        .collect();
    let mut scores = Array2::zeros((n, opts.k));
    for (i, refit) in refits.into_iter().enumerate() {
        match refit {
            Ok(s) => scores.row_mut(i).assign(&s),
            Err(last) => {
                scores.row_mut(i).assign(&last);
                diverged.push(data.subject_ids[i].clone());
            }
        }
    }
    diverged.sort();
    diverged.dedup();
    if diverged.len() * 100 > n {
        return Err(Error::SubjectDivergence {
            subjects: diverged,
            total: n,
        });
    }

    let eta = scores.dot(&core.components);
    let fitted = Array2::from_shape_fn((n, t), |(i, j)| (core.mean[j] + eta[[i, j]]).exp());
    log::debug!("pfpca: step-1 lambda {}", s1.lambda);
    Ok(Decomposition {
        method: Method::Pfpca,
        subject_ids: data.subject_ids.clone(),
        grid: data.grid.clone(),
        mean: Some(core.mean),
        components: core.components,
        scores,
        eigenvalues: Some(core.eigenvalues),
        noise_var: None,
        fitted,
        converged: true,
    })
}
