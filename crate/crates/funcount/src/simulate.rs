//! Synthetic-data generators matching each model's generative process.
//! These serve as the oracles for the estimators.

use crate::error::{Error, Result};
use crate::rng::stream_rng;
use ndarray::{Array1, Array2, ArrayView1, ArrayView2};
use rand::Rng;
use rand_distr::{Distribution, Normal, Poisson};

/// Largest allowed log-intensity; exp arguments beyond this are clipped.
pub const MAX_LOG_INTENSITY: f64 = 30.0;

fn check_dims(mean: ArrayView1<f64>, components: ArrayView2<f64>, score_sds: &[f64]) -> Result<()> {
    if components.ncols() != mean.len() {
        return Err(Error::dim(format!(
            "components have {} columns but mean has {} points",
            components.ncols(),
            mean.len()
        )));
    }
    if components.nrows() != score_sds.len() {
        return Err(Error::dim(format!(
            "{} components but {} score standard deviations",
            components.nrows(),
            score_sds.len()
        )));
    }
    Ok(())
}

/// Draw N Gaussian curves: mean + sum_k s_k phi_k + noise, with
/// s_k ~ N(0, sd_k^2). Row i uses stream i of the seed.
pub fn simulate_gaussian(
    mean: ArrayView1<f64>,
    components: ArrayView2<f64>,
    score_sds: &[f64],
    noise_sd: f64,
    n: usize,
    seed: u64,
) -> Result<Array2<f64>> {
    check_dims(mean, components, score_sds)?;
    if noise_sd < 0.0 {
        return Err(Error::invalid("noise_sd must be nonnegative"));
    }
    let t = mean.len();
    let k = score_sds.len();
    let mut out = Array2::zeros((n, t));
    for i in 0..n {
        let mut rng = stream_rng(seed, i as u64);
        let mut row: Array1<f64> = mean.to_owned();
        for c in 0..k {
            let s: f64 = if score_sds[c] > 0.0 {
                Normal::new(0.0, score_sds[c]).unwrap().sample(&mut rng)
            } else {
                0.0
            };
            row.scaled_add(s, &components.row(c));
        }
        if noise_sd > 0.0 {
            let noise = Normal::new(0.0, noise_sd).unwrap();
            for v in row.iter_mut() {
                *v += noise.sample(&mut rng);
            }
        }
        out.row_mut(i).assign(&row);
    }
    Ok(out)
}

/// Map Gaussian log-scale curves onto counts: round(exp(z)) - 1 clipped at 0.
pub fn gaussian_to_counts(z: &Array2<f64>) -> Array2<u64> {
    z.mapv(|v| {
        let y = v.min(MAX_LOG_INTENSITY).exp().round() - 1.0;
        if y > 0.0 {
            y as u64
        } else {
            0
        }
    })
}

/// Draw N count curves with Y_i(t) ~ Poisson(exp(mean + sum_k s_k phi_k)).
pub fn simulate_poisson_fpca(
    mean: ArrayView1<f64>,
    components: ArrayView2<f64>,
    score_sds: &[f64],
    n: usize,
    seed: u64,
) -> Result<Array2<u64>> {
    check_dims(mean, components, score_sds)?;
    let t = mean.len();
    let k = score_sds.len();
    let mut out = Array2::zeros((n, t));
    let mut clipped = false;
    for i in 0..n {
        let mut rng = stream_rng(seed, i as u64);
        let mut eta: Array1<f64> = mean.to_owned();
        for c in 0..k {
            let s: f64 = if score_sds[c] > 0.0 {
                Normal::new(0.0, score_sds[c]).unwrap().sample(&mut rng)
            } else {
                0.0
            };
            eta.scaled_add(s, &components.row(c));
        }
        for (j, &e) in eta.iter().enumerate() {
            if e > MAX_LOG_INTENSITY {
                clipped = true;
            }
            let lambda = e.min(MAX_LOG_INTENSITY).exp();
            out[[i, j]] = draw_poisson(&mut rng, lambda);
        }
    }
    if clipped {
        log::warn!("simulate_poisson_fpca: log-intensity exceeded {MAX_LOG_INTENSITY}, clipped");
    }
    Ok(out)
}

/// Nonnegative score distribution for the identity-link generator.
#[derive(Debug, Clone, Copy)]
pub enum NarfdScoreDist {
    /// Uniform over integers lo..=hi.
    UniformInt { lo: u64, hi: u64 },
    /// Uniform over [lo, hi).
    Uniform { lo: f64, hi: f64 },
    Constant(f64),
}

impl NarfdScoreDist {
    fn sample(&self, rng: &mut impl Rng) -> f64 {
        match *self {
            NarfdScoreDist::UniformInt { lo, hi } => rng.gen_range(lo..=hi) as f64,
            NarfdScoreDist::Uniform { lo, hi } => rng.gen_range(lo..hi),
            NarfdScoreDist::Constant(c) => c,
        }
    }
}

/// Draw N count curves with Y_i(t) ~ Poisson(sum_k s_ik p_k(t)), scores >= 0.
/// `prototypes` is K x T, nonnegative. Returns (counts, scores).
pub fn simulate_narfd(
    prototypes: ArrayView2<f64>,
    score_dist: NarfdScoreDist,
    n: usize,
    seed: u64,
) -> Result<(Array2<u64>, Array2<f64>)> {
    if prototypes.iter().any(|&v| v < 0.0) {
        return Err(Error::invalid("prototypes must be nonnegative"));
    }
    if let NarfdScoreDist::Constant(c) = score_dist {
        if c < 0.0 {
            return Err(Error::invalid("scores must be nonnegative"));
        }
    }
    if let NarfdScoreDist::Uniform { lo, .. } = score_dist {
        if lo < 0.0 {
            return Err(Error::invalid("scores must be nonnegative"));
        }
    }
    let (k, t) = (prototypes.nrows(), prototypes.ncols());
    let mut counts = Array2::zeros((n, t));
    let mut scores = Array2::zeros((n, k));
    for i in 0..n {
        let mut rng = stream_rng(seed, i as u64);
        for c in 0..k {
            scores[[i, c]] = score_dist.sample(&mut rng);
        }
        for j in 0..t {
            let lambda: f64 = (0..k).map(|c| scores[[i, c]] * prototypes[[c, j]]).sum();
            counts[[i, j]] = draw_poisson(&mut rng, lambda);
        }
    }
    Ok((counts, scores))
}

/// Bernoulli outcomes from a logistic link on covariates and scores.
pub fn simulate_mortality(
    scores: ArrayView2<f64>,
    covariates: ArrayView2<f64>,
    score_coefs: &[f64],
    covariate_coefs: &[f64],
    intercept: f64,
    seed: u64,
) -> Result<Vec<u8>> {
    let n = scores.nrows();
    if covariates.nrows() != n {
        return Err(Error::dim("scores and covariates row counts differ"));
    }
    if scores.ncols() != score_coefs.len() || covariates.ncols() != covariate_coefs.len() {
        return Err(Error::dim("coefficient lengths do not match matrices"));
    }
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let mut rng = stream_rng(seed, i as u64);
        let mut eta = intercept;
        for (c, &b) in score_coefs.iter().enumerate() {
            eta += b * scores[[i, c]];
        }
        for (c, &b) in covariate_coefs.iter().enumerate() {
            eta += b * covariates[[i, c]];
        }
        let p = 1.0 / (1.0 + (-eta).exp());
        out.push(if rng.gen::<f64>() < p { 1 } else { 0 });
    }
    Ok(out)
}

fn draw_poisson(rng: &mut impl Rng, lambda: f64) -> u64 {
    if lambda <= 0.0 {
        return 0;
    }
    let draw: f64 = Poisson::new(lambda).unwrap().sample(rng);
    draw.max(0.0) as u64
}

/// Gram-Schmidt under the grid quadrature, used by tests and the CLI to turn
/// smooth shapes into orthonormal components.
pub fn orthonormalize(rows: ArrayView2<f64>, grid: &[f64]) -> Array2<f64> {
    let w = crate::quad::trapezoid_weights(grid);
    let (k, t) = (rows.nrows(), rows.ncols());
    let mut out = Array2::zeros((k, t));
    for i in 0..k {
        let mut v: Array1<f64> = rows.row(i).to_owned();
        for p in 0..i {
            let proj = crate::quad::inner(&w, v.view(), out.row(p));
            let prev = out.row(p).to_owned();
            v.scaled_add(-proj, &prev);
        }
        let norm = crate::quad::inner(&w, v.view(), v.view()).sqrt();
        assert!(norm > 1e-10, "component {i} is degenerate after projection");
        v.mapv_inplace(|x| x / norm);
        out.row_mut(i).assign(&v);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quad::{five_min_grid, inner, trapezoid_weights};
    use ndarray::array;

    fn test_components(t: usize) -> (Vec<f64>, Array2<f64>) {
        let grid = five_min_grid(t);
        let span = grid[t - 1] - grid[0];
        let raw = Array2::from_shape_fn((2, t), |(k, j)| {
            let x = (grid[j] - grid[0]) / span;
            match k {
                0 => (2.0 * std::f64::consts::PI * x).sin(),
                _ => (2.0 * std::f64::consts::PI * x).cos(),
            }
        });
        let comps = orthonormalize(raw.view(), &grid);
        (grid, comps)
    }

    #[test]
    fn zero_sds_reproduce_the_mean() {
        let (grid, comps) = test_components(40);
        let mean = Array1::from_elem(grid.len(), 1.25);
        let z = simulate_gaussian(mean.view(), comps.view(), &[0.0, 0.0], 0.0, 5, 3).unwrap();
        for row in z.rows() {
            for &v in row.iter() {
                assert!((v - 1.25).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn same_seed_is_identical() {
        let (grid, comps) = test_components(30);
        let mean = Array1::zeros(grid.len());
        let a = simulate_gaussian(mean.view(), comps.view(), &[2.0, 1.0], 0.5, 8, 42).unwrap();
        let b = simulate_gaussian(mean.view(), comps.view(), &[2.0, 1.0], 0.5, 8, 42).unwrap();
        assert_eq!(a, b);
        let c = simulate_poisson_fpca(mean.view(), comps.view(), &[1.0, 0.5], 8, 42).unwrap();
        let d = simulate_poisson_fpca(mean.view(), comps.view(), &[1.0, 0.5], 8, 42).unwrap();
        assert_eq!(c, d);
    }

    #[test]
    fn empirical_covariance_matches_model() {
        // cov = sum_k sd_k^2 phi_k phi_k' + noise^2 I within 5% Frobenius.
        let (grid, comps) = test_components(25);
        let t = grid.len();
        let mean = Array1::zeros(t);
        let sds = [3.0, 1.5];
        let noise = 0.5;
        let n = 10_000;
        let z = simulate_gaussian(mean.view(), comps.view(), &sds, noise, n, 11).unwrap();
        let col_means: Array1<f64> = z.mean_axis(ndarray::Axis(0)).unwrap();
        let mut emp = Array2::<f64>::zeros((t, t));
        for i in 0..n {
            for a in 0..t {
                let da = z[[i, a]] - col_means[a];
                for b in 0..t {
                    emp[[a, b]] += da * (z[[i, b]] - col_means[b]);
                }
            }
        }
        emp.mapv_inplace(|v| v / n as f64);
        let mut model = Array2::<f64>::zeros((t, t));
        for (k, &sd) in sds.iter().enumerate() {
            for a in 0..t {
                for b in 0..t {
                    model[[a, b]] += sd * sd * comps[[k, a]] * comps[[k, b]];
                }
            }
        }
        for a in 0..t {
            model[[a, a]] += noise * noise;
        }
        let diff = (&emp - &model).mapv(|v| v * v).sum().sqrt();
        let scale = model.mapv(|v| v * v).sum().sqrt();
        assert!(diff / scale < 0.05, "relative Frobenius error {}", diff / scale);
    }

    #[test]
    fn poisson_means_match_intensity() {
        let t = 20;
        let grid = five_min_grid(t);
        let mean = Array1::from_elem(t, 4.0_f64.ln());
        let comps = Array2::zeros((0, t));
        let y = simulate_poisson_fpca(mean.view(), comps.view(), &[], 10_000, 5).unwrap();
        for j in 0..t {
            let m = y.column(j).iter().map(|&v| v as f64).sum::<f64>() / 10_000.0;
            assert!((m - 4.0).abs() / 4.0 < 0.02, "column {j} mean {m}");
            // Poisson: variance close to mean
            let var = y.column(j).iter().map(|&v| (v as f64 - m).powi(2)).sum::<f64>() / 9_999.0;
            assert!((var - 4.0).abs() / 4.0 < 0.08, "column {j} var {var}");
        }
        let _ = grid;
    }

    #[test]
    fn tiny_intensity_gives_zeros() {
        let t = 10;
        let mean = Array1::from_elem(t, -50.0);
        let comps = Array2::zeros((0, t));
        let y = simulate_poisson_fpca(mean.view(), comps.view(), &[], 200, 9).unwrap();
        assert!(y.iter().all(|&v| v == 0));
    }

    #[test]
    fn narfd_respects_supports() {
        let protos = array![[2.0, 2.0, 0.0, 0.0], [0.0, 0.0, 0.0, 3.0]];
        let (y, s) = simulate_narfd(protos.view(), NarfdScoreDist::UniformInt { lo: 1, hi: 5 }, 50, 17).unwrap();
        assert!(y.column(2).iter().all(|&v| v == 0));
        assert!(s.iter().all(|&v| v >= 1.0 && v <= 5.0));

        let (zeros, _) = simulate_narfd(protos.view(), NarfdScoreDist::Constant(0.0), 10, 3).unwrap();
        assert!(zeros.iter().all(|&v| v == 0));
    }

    #[test]
    fn narfd_column_means_match_prototype() {
        let protos = Array2::from_elem((1, 6), 7.0);
        let (y, _) = simulate_narfd(protos.view(), NarfdScoreDist::Constant(1.0), 20_000, 8).unwrap();
        for j in 0..6 {
            let m = y.column(j).iter().map(|&v| v as f64).sum::<f64>() / 20_000.0;
            assert!((m - 7.0).abs() / 7.0 < 0.02);
        }
    }

    #[test]
    fn mortality_prevalence_tracks_intercept() {
        let n = 10_000;
        let scores = Array2::zeros((n, 0));
        let covs = Array2::zeros((n, 0));
        let y = simulate_mortality(scores.view(), covs.view(), &[], &[], 0.0, 21).unwrap();
        let mean = y.iter().map(|&v| v as f64).sum::<f64>() / n as f64;
        assert!((mean - 0.5).abs() < 0.02);

        // intercept logit(0.06) = -2.75 gives roughly 6% prevalence
        let y = simulate_mortality(scores.view(), covs.view(), &[], &[], -2.75, 22).unwrap();
        let mean = y.iter().map(|&v| v as f64).sum::<f64>() / n as f64;
        assert!((mean - 0.06).abs() < 0.01, "prevalence {mean}");

        let y = simulate_mortality(scores.view(), covs.view(), &[], &[], -50.0, 23).unwrap();
        assert!(y.iter().all(|&v| v == 0));
    }

    #[test]
    fn orthonormalize_gives_identity_gram() {
        let (grid, comps) = test_components(60);
        let w = trapezoid_weights(&grid);
        for a in 0..2 {
            for b in 0..2 {
                let g = inner(&w, comps.row(a), comps.row(b));
                let expect = if a == b { 1.0 } else { 0.0 };
                assert!((g - expect).abs() < 1e-10);
            }
        }
    }
}
