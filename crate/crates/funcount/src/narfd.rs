//! Nonnegative and regularized function decomposition.
//!
//! Counts follow an identity-link Poisson model whose intensity is a
//! nonnegative combination of nonnegative spline prototypes. Fitting
//! alternates between per-subject score updates and a joint prototype
//! update; each half-step solves its convex subproblem by an active-set
//! projected Newton method, so the penalized negative log-likelihood is
//! nonincreasing along the trace.

use crate::basis::BasisSystem;
use crate::decomposition::{Decomposition, Method};
use crate::error::{Error, Result};
use crate::ingest::CountCurveSet;
use crate::linalg::solve_spd_ridged;
use crate::quad::trapezoid_weights;
use crate::rng::stream_rng;
use ndarray::{Array1, Array2, ArrayView2};
use rand::Rng;
use rayon::prelude::*;

/// Intensities below this floor are clamped inside the likelihood so the
/// log stays finite (standard KL-NMF practice).
pub const INTENSITY_FLOOR: f64 = 1e-10;

#[derive(Debug, Clone, Copy)]
pub enum LambdaChoice {
    Fixed(f64),
    /// 5-fold subject-wise cross-validated Poisson deviance over
    /// [`lambda_ladder`].
    CrossValidated,
}

#[derive(Debug, Clone)]
pub struct NarfdOptions {
    pub k: usize,
    pub lambda: LambdaChoice,
    pub max_iter: usize,
    /// Relative objective-change threshold for stopping the alternation.
    pub tol: f64,
    /// Seed for the uniform(0.5, 1.5) initialization.
    pub init_seed: u64,
    /// KKT tolerance for the convex subproblems.
    pub kkt_tol: f64,
}

impl Default for NarfdOptions {
    fn default() -> Self {
        Self {
            k: 6,
            lambda: LambdaChoice::CrossValidated,
            max_iter: 200,
            tol: 1e-7,
            init_seed: 0x6e61_7266,
            kkt_tol: 1e-7,
        }
    }
}

/// 7-point log ladder searched by cross-validation.
pub fn lambda_ladder() -> Vec<f64> {
    (-2..=4).map(|e| 10f64.powi(e)).collect()
}

/// Fitting state: spline loading matrix, scores, and the objective trace
/// (one entry at initialization plus one per half-iteration).
#[derive(Debug, Clone)]
pub struct NarfdState {
    /// M x K nonnegative spline coefficients.
    pub phi: Array2<f64>,
    /// N x K nonnegative scores.
    pub scores: Array2<f64>,
    pub lambda: f64,
    pub objective_trace: Vec<f64>,
    pub converged: bool,
}

// ---------------------------------------------------------------------------
// Convex subproblem machinery
// ---------------------------------------------------------------------------

/// Minimize a smooth convex function over the nonnegative orthant by
/// projected Newton with an active-set split. `f_g` returns the objective
/// and gradient; `hess` the Hessian. Returns (solution, kkt satisfied).
fn nonneg_newton<FG, H>(
    x0: Array1<f64>,
    f_g: FG,
    hess: H,
    kkt_tol: f64,
    max_iter: usize,
) -> (Array1<f64>, bool)
where
    FG: Fn(&Array1<f64>) -> (f64, Array1<f64>),
    H: Fn(&Array1<f64>) -> Array2<f64>,
{
    let n = x0.len();
    let mut x = x0.mapv(|v| v.max(0.0));
    let (mut f, mut g) = f_g(&x);
    for _ in 0..max_iter {
        let kkt = kkt_residual(&x, &g);
        if kkt <= kkt_tol {
            return (x, true);
        }
        let free: Vec<usize> = (0..n).filter(|&i| x[i] > 0.0 || g[i] < 0.0).collect();
        if free.is_empty() {
            return (x, true);
        }
        let h = hess(&x);
        let nf = free.len();
        let mut hf = Array2::zeros((nf, nf));
        let mut gf = Array1::zeros(nf);
        for (a, &i) in free.iter().enumerate() {
            gf[a] = -g[i];
            for (b, &j) in free.iter().enumerate() {
                hf[[a, b]] = h[[i, j]];
            }
        }
        let scale = (0..nf).map(|i| hf[[i, i]].abs()).fold(0.0_f64, f64::max).max(1.0);
        for i in 0..nf {
            hf[[i, i]] += 1e-10 * scale;
        }
        let delta = solve_spd_ridged(&hf, &gf);
        let mut moved = false;
        for direction in 0..2 {
            let dir: Vec<(usize, f64)> = if direction == 0 {
                free.iter().enumerate().map(|(a, &i)| (i, delta[a])).collect()
            } else {
                // fallback: projected gradient
                free.iter().map(|&i| (i, -g[i])).collect()
            };
            let slack = 1e-12 * (1.0 + f.abs());
            let mut step = 1.0;
            for _ in 0..50 {
                let mut cand = x.clone();
                for &(i, d) in &dir {
                    cand[i] = (cand[i] + step * d).max(0.0);
                }
                if cand == x {
                    break;
                }
                let (cf, cg) = f_g(&cand);
                if cf.is_finite() && cf <= f + slack {
                    x = cand;
                    f = f.min(cf);
                    g = cg;
                    moved = true;
                    break;
                }
                step *= 0.5;
            }
            if moved {
                break;
            }
        }
        if !moved {
            break;
        }
    }
    let ok = kkt_residual(&x, &g) <= kkt_tol.max(1e-6);
    (x, ok)
}

/// KKT residual for min f(x) s.t. x >= 0: |g| on active coordinates,
/// max(-g, 0) on coordinates at the bound.
fn kkt_residual(x: &Array1<f64>, g: &Array1<f64>) -> f64 {
    let mut worst = 0.0_f64;
    for i in 0..x.len() {
        let r = if x[i] > 0.0 { g[i].abs() } else { (-g[i]).max(0.0) };
        worst = worst.max(r);
    }
    worst
}

/// Negative Poisson log-likelihood (identity link, log y! dropped) and its
/// gradient in the score vector, with intensities floored inside the log.
/// `prototypes` is T x K.
pub fn score_objective(curve: &[u64], prototypes: ArrayView2<f64>, s: &[f64]) -> (f64, Vec<f64>) {
    let t = curve.len();
    let k = prototypes.ncols();
    assert_eq!(prototypes.nrows(), t, "prototype rows must match curve length");
    assert_eq!(s.len(), k, "score length mismatch");
    let mut f = 0.0;
    let mut grad = vec![0.0; k];
    for j in 0..t {
        let mut mu = 0.0;
        for c in 0..k {
            mu += prototypes[[j, c]] * s[c];
        }
        let y = curve[j] as f64;
        let floored = mu.max(INTENSITY_FLOOR);
        f += mu - y * floored.ln();
        let r = if mu > INTENSITY_FLOOR { 1.0 - y / mu } else { 1.0 };
        for c in 0..k {
            grad[c] += r * prototypes[[j, c]];
        }
    }
    (f, grad)
}

fn score_hessian(curve: &[u64], prototypes: ArrayView2<f64>, s: &Array1<f64>) -> Array2<f64> {
    let t = curve.len();
    let k = prototypes.ncols();
    let mut h = Array2::zeros((k, k));
    for j in 0..t {
        let y = curve[j] as f64;
        if y == 0.0 {
            continue;
        }
        let mut mu = 0.0;
        for c in 0..k {
            mu += prototypes[[j, c]] * s[c];
        }
        if mu <= INTENSITY_FLOOR {
            continue;
        }
        let w = y / (mu * mu);
        for a in 0..k {
            for b in 0..k {
                h[[a, b]] += w * prototypes[[j, a]] * prototypes[[j, b]];
            }
        }
    }
    h
}

fn solve_scores(
    curve: &[u64],
    prototypes: ArrayView2<f64>,
    start: Array1<f64>,
    kkt_tol: f64,
) -> Array1<f64> {
    let (f0, _) = score_objective(curve, prototypes, start.as_slice().unwrap());
    let (sol, _) = nonneg_newton(
        start.clone(),
        |s| {
            let (f, g) = score_objective(curve, prototypes, s.as_slice().unwrap());
            (f, Array1::from(g))
        },
        |s| score_hessian(curve, prototypes, s),
        kkt_tol,
        200,
    );
    let (f1, _) = score_objective(curve, prototypes, sol.as_slice().unwrap());
    // never hand back anything worse than the warm start
    if f1 <= f0 {
        sol
    } else {
        start
    }
}

/// Nonnegative identity-link Poisson score update for one curve.
/// `prototype_matrix` is T x K, nonnegative, with no all-zero column.
pub fn update_scores_nnls_poisson(
    curve: &[u64],
    prototype_matrix: ArrayView2<f64>,
) -> Result<Array1<f64>> {
    let t = curve.len();
    let k = prototype_matrix.ncols();
    if prototype_matrix.nrows() != t {
        return Err(Error::dim(format!(
            "prototype matrix has {} rows, curve has {t} points",
            prototype_matrix.nrows()
        )));
    }
    if prototype_matrix.iter().any(|&v| v < 0.0) {
        return Err(Error::invalid("prototype matrix must be nonnegative"));
    }
    for c in 0..k {
        if prototype_matrix.column(c).iter().all(|&v| v == 0.0) {
            return Err(Error::invalid(format!("prototype column {c} is identically zero")));
        }
    }
    // start from the scale-matched constant guess
    let ybar = curve.iter().sum::<u64>() as f64 / t as f64;
    let col_means: Vec<f64> = (0..k)
        .map(|c| prototype_matrix.column(c).sum() / t as f64)
        .collect();
    let start: Array1<f64> = col_means
        .iter()
        .map(|&m| if m > 0.0 { ybar / (k as f64 * m) } else { 0.0 })
        .collect();
    Ok(solve_scores(curve, prototype_matrix, start, 1e-8))
}

// ---------------------------------------------------------------------------
// Prototype update
// ---------------------------------------------------------------------------

struct PrototypeProblem<'a> {
    counts: &'a Array2<f64>,
    design: &'a Array2<f64>,
    penalty: &'a Array2<f64>,
    scores: &'a Array2<f64>,
    lambda: f64,
    /// Columns with zero total score mass are pinned at zero.
    active_cols: Vec<usize>,
}

impl<'a> PrototypeProblem<'a> {
    fn unpack(&self, x: &Array1<f64>, m: usize) -> Array2<f64> {
        // x holds the active columns stacked; inactive columns are zero
        let k_all = self.scores.ncols();
        let mut phi = Array2::zeros((m, k_all));
        for (slot, &col) in self.active_cols.iter().enumerate() {
            for a in 0..m {
                phi[[a, col]] = x[slot * m + a];
            }
        }
        phi
    }

    fn objective_grad(&self, x: &Array1<f64>) -> (f64, Array1<f64>) {
        let m = self.design.ncols();
        let phi = self.unpack(x, m);
        let a = self.design.dot(&phi); // T x K
        let mu = self.scores.dot(&a.t()); // N x T
        let (n, t) = (mu.nrows(), mu.ncols());
        let mut f = 0.0;
        let mut r = Array2::zeros((n, t));
        for i in 0..n {
            for j in 0..t {
                let y = self.counts[[i, j]];
                let v = mu[[i, j]];
                let floored = v.max(INTENSITY_FLOOR);
                f += v - y * floored.ln();
                r[[i, j]] = if v > INTENSITY_FLOOR { 1.0 - y / v } else { 1.0 };
            }
        }
        // gradient in phi: design' (r' scores) + 2 lambda P phi
        let grad_mat = self.design.t().dot(&r.t().dot(self.scores))
            + self.penalty.dot(&phi).mapv(|v| v * 2.0 * self.lambda);
        for col in &self.active_cols {
            let phi_col = phi.column(*col);
            f += self.lambda * phi_col.dot(&self.penalty.dot(&phi_col.to_owned()));
        }
        let mut g = Array1::zeros(x.len());
        for (slot, &col) in self.active_cols.iter().enumerate() {
            for a in 0..m {
                g[slot * m + a] = grad_mat[[a, col]];
            }
        }
        (f, g)
    }

    fn hessian(&self, x: &Array1<f64>) -> Array2<f64> {
        let m = self.design.ncols();
        let phi = self.unpack(x, m);
        let a = self.design.dot(&phi);
        let mu = self.scores.dot(&a.t());
        let (n, t) = (mu.nrows(), mu.ncols());
        let nk = self.active_cols.len();
        let mut h = Array2::zeros((nk * m, nk * m));
        // block (k, k') = design' diag(c_kk') design, with
        // c_kk'[j] = sum_i y_ij s_ik s_ik' / mu_ij^2 outside the floor
        let mut weights = Array2::zeros((n, t));
        for i in 0..n {
            for j in 0..t {
                let y = self.counts[[i, j]];
                let v = mu[[i, j]];
                if y > 0.0 && v > INTENSITY_FLOOR {
                    weights[[i, j]] = y / (v * v);
                }
            }
        }
        for (sa, &ka) in self.active_cols.iter().enumerate() {
            for (sb, &kb) in self.active_cols.iter().enumerate() {
                if sb < sa {
                    continue;
                }
                let mut c = Array1::<f64>::zeros(t);
                for i in 0..n {
                    let sik = self.scores[[i, ka]];
                    let sik2 = self.scores[[i, kb]];
                    if sik == 0.0 || sik2 == 0.0 {
                        continue;
                    }
                    for j in 0..t {
                        c[j] += weights[[i, j]] * sik * sik2;
                    }
                }
                let mut block = Array2::zeros((m, m));
                for j in 0..t {
                    if c[j] == 0.0 {
                        continue;
                    }
                    for aa in 0..m {
                        let da = self.design[[j, aa]];
                        if da == 0.0 {
                            continue;
                        }
                        for bb in 0..m {
                            block[[aa, bb]] += c[j] * da * self.design[[j, bb]];
                        }
                    }
                }
                if sa == sb {
                    block += &self.penalty.mapv(|v| v * 2.0 * self.lambda);
                }
                for aa in 0..m {
                    for bb in 0..m {
                        h[[sa * m + aa, sb * m + bb]] = block[[aa, bb]];
                        h[[sb * m + bb, sa * m + aa]] = block[[aa, bb]];
                    }
                }
            }
        }
        h
    }
}

fn solve_prototypes(
    counts: &Array2<f64>,
    basis: &BasisSystem,
    scores: &Array2<f64>,
    lambda: f64,
    start: &Array2<f64>,
    kkt_tol: f64,
) -> Array2<f64> {
    let m = basis.m;
    let k = scores.ncols();
    let active_cols: Vec<usize> = (0..k).filter(|&c| scores.column(c).sum() > 0.0).collect();
    let mut result = Array2::zeros((m, k)); // pinned columns stay zero
    if active_cols.is_empty() {
        return result;
    }
    let problem = PrototypeProblem {
        counts,
        design: &basis.design,
        penalty: &basis.penalty,
        scores,
        lambda,
        active_cols: active_cols.clone(),
    };
    let mut x0 = Array1::zeros(active_cols.len() * m);
    for (slot, &col) in active_cols.iter().enumerate() {
        for a in 0..m {
            x0[slot * m + a] = start[[a, col]].max(0.0);
        }
    }
    let (f0, _) = problem.objective_grad(&x0);
    let (x, _) = nonneg_newton(
        x0.clone(),
        |x| problem.objective_grad(x),
        |x| problem.hessian(x),
        kkt_tol,
        200,
    );
    let (f1, _) = problem.objective_grad(&x);
    let chosen = if f1 <= f0 { x } else { x0 };
    for (slot, &col) in active_cols.iter().enumerate() {
        for a in 0..m {
            result[[a, col]] = chosen[slot * m + a];
        }
    }
    result
}

/// Penalized nonnegative prototype update with scores held fixed.
/// Returns the M x K spline coefficient matrix.
pub fn update_prototypes(
    data: &CountCurveSet,
    scores: ArrayView2<f64>,
    basis: &BasisSystem,
    lambda: f64,
) -> Result<Array2<f64>> {
    if scores.nrows() != data.n_subjects() {
        return Err(Error::dim("scores rows must match subject count"));
    }
    if scores.iter().any(|&v| v < 0.0) {
        return Err(Error::invalid("scores must be nonnegative"));
    }
    if lambda < 0.0 {
        return Err(Error::invalid("lambda must be nonnegative"));
    }
    let counts = data.counts.mapv(|v| v as f64);
    let ybar = counts.mean().unwrap_or(0.0);
    let k = scores.ncols();
    let mean_score = scores.mean().unwrap_or(0.0);
    let init = if mean_score > 0.0 {
        (ybar / (k as f64 * mean_score)).max(1e-3)
    } else {
        0.0
    };
    let start = Array2::from_elem((basis.m, k), init);
    Ok(solve_prototypes(&counts, basis, &scores.to_owned(), lambda, &start, 1e-8))
}

// ---------------------------------------------------------------------------
// Alternating minimization
// ---------------------------------------------------------------------------

fn global_objective(
    counts: &Array2<f64>,
    design: &Array2<f64>,
    penalty: &Array2<f64>,
    phi: &Array2<f64>,
    scores: &Array2<f64>,
    lambda: f64,
) -> f64 {
    let a = design.dot(phi);
    let mu = scores.dot(&a.t());
    let mut f = 0.0;
    for (y, v) in counts.iter().zip(mu.iter()) {
        f += v - y * v.max(INTENSITY_FLOOR).ln();
    }
    for c in 0..phi.ncols() {
        let col = phi.column(c).to_owned();
        f += lambda * col.dot(&penalty.dot(&col));
    }
    f
}

/// Fit NARFD and return both the decomposition and the raw fitting state.
pub fn fit_narfd_detailed(
    data: &CountCurveSet,
    basis: &BasisSystem,
    opts: &NarfdOptions,
) -> Result<(Decomposition, NarfdState)> {
    if opts.k < 1 {
        return Err(Error::invalid("number of prototypes must be at least 1"));
    }
    if basis.grid.len() != data.n_times() {
        return Err(Error::dim("basis grid does not match data grid"));
    }
    let lambda = match opts.lambda {
        LambdaChoice::Fixed(l) => {
            if l < 0.0 {
                return Err(Error::invalid("lambda must be nonnegative"));
            }
            l
        }
        LambdaChoice::CrossValidated => cross_validate_lambda(data, basis, opts)?,
    };
    let (decomp, state) = fit_at_lambda(data, basis, opts, lambda);
    Ok((decomp, state))
}

/// Fit NARFD with the given options.
pub fn fit_narfd(data: &CountCurveSet, basis: &BasisSystem, opts: &NarfdOptions) -> Result<Decomposition> {
    fit_narfd_detailed(data, basis, opts).map(|(d, _)| d)
}

fn fit_at_lambda(
    data: &CountCurveSet,
    basis: &BasisSystem,
    opts: &NarfdOptions,
    lambda: f64,
) -> (Decomposition, NarfdState) {
    let n = data.n_subjects();
    let k = opts.k;
    let m = basis.m;
    let counts = data.counts.mapv(|v| v as f64);

    // Degenerate success: nothing to decompose.
    if counts.iter().all(|&v| v == 0.0) {
        let state = NarfdState {
            phi: Array2::zeros((m, k)),
            scores: Array2::zeros((n, k)),
            lambda,
            objective_trace: vec![0.0],
            converged: true,
        };
        let decomp = assemble(data, basis, &state);
        return (decomp, state);
    }

    // uniform(0.5, 1.5) entries scaled so the initial intensity matches the
    // mean count
    let ybar = counts.mean().unwrap();
    let scale = (ybar / k as f64).sqrt().max(1e-3);
    let mut rng = stream_rng(opts.init_seed, 0);
    let mut phi = Array2::zeros((m, k));
    for v in phi.iter_mut() {
        *v = rng.gen_range(0.5..1.5) * scale;
    }
    let mut scores = Array2::zeros((n, k));
    for v in scores.iter_mut() {
        *v = rng.gen_range(0.5..1.5) * scale;
    }

    let mut trace = vec![global_objective(&counts, &basis.design, &basis.penalty, &phi, &scores, lambda)];
    let mut converged = false;
    for _ in 0..opts.max_iter {
        // (a) per-subject score updates
        let a = basis.design.dot(&phi);
        let new_scores: Vec<Array1<f64>> = (0..n)
            .into_par_iter()
            .map(|i| {
                let row: Vec<u64> = data.counts.row(i).to_vec();
                solve_scores(&row, a.view(), scores.row(i).to_owned(), opts.kkt_tol)
            })
            .collect();
        for (i, s) in new_scores.into_iter().enumerate() {
            scores.row_mut(i).assign(&s);
        }
        trace.push(global_objective(&counts, &basis.design, &basis.penalty, &phi, &scores, lambda));

        // (b) joint prototype update
        phi = solve_prototypes(&counts, basis, &scores, lambda, &phi, opts.kkt_tol);
        trace.push(global_objective(&counts, &basis.design, &basis.penalty, &phi, &scores, lambda));

        let len = trace.len();
        let before = trace[len - 3];
        let after = trace[len - 1];
        if (before - after).abs() <= opts.tol * (1.0 + before.abs()) {
            converged = true;
            break;
        }
    }

    let state = NarfdState {
        phi,
        scores,
        lambda,
        objective_trace: trace,
        converged,
    };
    let decomp = assemble(data, basis, &state);
    (decomp, state)
}

/// Normalize prototypes to unit integral, rescale scores, order components
/// by descending total score mass, and build the decomposition.
fn assemble(data: &CountCurveSet, basis: &BasisSystem, state: &NarfdState) -> Decomposition {
    let t = data.n_times();
    let n = data.n_subjects();
    let k = state.phi.ncols();
    let w = trapezoid_weights(&data.grid);
    let on_grid = basis.design.dot(&state.phi); // T x K
    let mut components = Array2::zeros((k, t));
    let mut scores = state.scores.clone();
    let mut mass = Vec::with_capacity(k);
    for c in 0..k {
        let col = on_grid.column(c);
        let integral: f64 = (0..t).map(|j| w[j] * col[j]).sum();
        if integral > 0.0 {
            for j in 0..t {
                components[[c, j]] = col[j] / integral;
            }
            for i in 0..n {
                scores[[i, c]] *= integral;
            }
        } else {
            for i in 0..n {
                scores[[i, c]] = 0.0;
            }
        }
        mass.push(scores.column(c).sum());
    }
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| mass[b].partial_cmp(&mass[a]).unwrap().then(a.cmp(&b)));
    let components = Array2::from_shape_fn((k, t), |(c, j)| components[[order[c], j]]);
    let scores = Array2::from_shape_fn((n, k), |(i, c)| scores[[i, order[c]]]);
    let fitted = scores.dot(&components);
    Decomposition {
        method: Method::Narfd,
        subject_ids: data.subject_ids.clone(),
        grid: data.grid.clone(),
        mean: None,
        components,
        scores,
        eigenvalues: None,
        noise_var: None,
        fitted,
        converged: state.converged,
    }
}

/// 5-fold subject-wise cross-validation of lambda by held-out Poisson
/// deviance: prototypes come from the training folds, held-out subjects get
/// score-only updates.
fn cross_validate_lambda(data: &CountCurveSet, basis: &BasisSystem, opts: &NarfdOptions) -> Result<f64> {
    let n = data.n_subjects();
    if n < 10 {
        return Err(Error::invalid(
            "cross-validated lambda needs at least 10 subjects; pass a fixed lambda",
        ));
    }
    let folds = 5usize;
    let mut order: Vec<usize> = (0..n).collect();
    // deterministic shuffle
    let mut rng = stream_rng(opts.init_seed, 1);
    for i in (1..n).rev() {
        let j = rng.gen_range(0..=i);
        order.swap(i, j);
    }
    let cv_opts = NarfdOptions {
        max_iter: opts.max_iter.min(40),
        ..opts.clone()
    };
    let mut best = (f64::INFINITY, lambda_ladder()[0]);
    for &lambda in &lambda_ladder() {
        let mut total_deviance = 0.0;
        for fold in 0..folds {
            let test: Vec<usize> = order.iter().copied().skip(fold).step_by(folds).collect();
            let test_set: std::collections::HashSet<usize> = test.iter().copied().collect();
            let train: Vec<usize> = (0..n).filter(|i| !test_set.contains(i)).collect();
            let train_counts = Array2::from_shape_fn((train.len(), data.n_times()), |(i, j)| {
                data.counts[[train[i], j]]
            });
            let train_set = CountCurveSet::new(
                train.iter().map(|&i| data.subject_ids[i].clone()).collect(),
                data.grid.clone(),
                train_counts,
            )?;
            let (_, state) = fit_at_lambda(&train_set, basis, &cv_opts, lambda);
            let a = basis.design.dot(&state.phi);
            for &i in &test {
                let row: Vec<u64> = data.counts.row(i).to_vec();
                let ybar = row.iter().sum::<u64>() as f64 / row.len() as f64;
                let start = Array1::from_elem(opts.k, (ybar / opts.k as f64).max(1e-6));
                let s = solve_scores(&row, a.view(), start, opts.kkt_tol);
                let mu = a.dot(&s);
                for (j, &y) in row.iter().enumerate() {
                    let m = mu[j].max(INTENSITY_FLOOR);
                    let y = y as f64;
                    let term = if y > 0.0 { y * (y / m).ln() } else { 0.0 };
                    total_deviance += 2.0 * (term - (y - m));
                }
            }
        }
        if total_deviance < best.0 {
            best = (total_deviance, lambda);
        }
    }
    Ok(best.1)
}
