//! Model-comparison metrics and plot-data emission: per-subject MAE on the
//! observation scale and the +/- 2-SD component effect curves.

use crate::decomposition::{Decomposition, Method};
use crate::error::{Error, Result};
use crate::linalg::sym_eigen_desc;
use crate::quad::trapezoid_weights;
use ndarray::{Array1, Array2, ArrayView2, Axis};
use std::io::Write;
use std::path::Path;

/// Mean absolute error per subject, on the observation (count) scale.
pub fn mae_per_subject(fitted: ArrayView2<f64>, observed: ArrayView2<u64>) -> Result<Array1<f64>> {
    if fitted.dim() != observed.dim() {
        return Err(Error::dim(format!(
            "fitted is {:?}, observed is {:?}",
            fitted.dim(),
            observed.dim()
        )));
    }
    let t = fitted.ncols() as f64;
    Ok(Array1::from_iter((0..fitted.nrows()).map(|i| {
        fitted
            .row(i)
            .iter()
            .zip(observed.row(i).iter())
            .map(|(&f, &o)| (f - o as f64).abs())
            .sum::<f64>()
            / t
    })))
}

/// Effect curves for component k (1-indexed): the model seen at scores of
/// +/- 2 empirical standard deviations.
///
/// GFPCA returns link-scale curves (mean +/- 2 sd phi); PFPCA returns the
/// exponentiated curves; NARFD returns the fitted-at-mean-scores baseline
/// with the shifted prototype, clipped at zero on the minus side.
pub struct EffectCurves {
    pub base: Array1<f64>,
    pub plus: Array1<f64>,
    pub minus: Array1<f64>,
}

pub fn effect_curves(decomp: &Decomposition, k: usize) -> Result<EffectCurves> {
    let k_total = decomp.n_components();
    if k < 1 || k > k_total {
        return Err(Error::invalid(format!(
            "component index {k} out of range 1..={k_total}"
        )));
    }
    let idx = k - 1;
    let t = decomp.grid.len();
    let col = decomp.scores.column(idx);
    let n = col.len() as f64;
    let mean_score = col.sum() / n;
    let sd = (col.iter().map(|&v| (v - mean_score).powi(2)).sum::<f64>() / n).sqrt();
    let phi = decomp.components.row(idx);

    match decomp.method {
        Method::Gfpca => {
            let mean = decomp.mean.as_ref().expect("GFPCA has a mean");
            let plus = Array1::from_shape_fn(t, |j| mean[j] + 2.0 * sd * phi[j]);
            let minus = Array1::from_shape_fn(t, |j| mean[j] - 2.0 * sd * phi[j]);
            Ok(EffectCurves {
                base: mean.clone(),
                plus,
                minus,
            })
        }
        Method::Pfpca => {
            let mean = decomp.mean.as_ref().expect("PFPCA has a mean");
            let base = mean.mapv(f64::exp);
            let plus = Array1::from_shape_fn(t, |j| (mean[j] + 2.0 * sd * phi[j]).exp());
            let minus = Array1::from_shape_fn(t, |j| (mean[j] - 2.0 * sd * phi[j]).exp());
            Ok(EffectCurves { base, plus, minus })
        }
        Method::Narfd => {
            let mean_scores = decomp.scores.mean_axis(Axis(0)).expect("nonempty scores");
            let base = mean_scores.dot(&decomp.components);
            let plus = Array1::from_shape_fn(t, |j| base[j] + 2.0 * sd * phi[j]);
            let minus = Array1::from_shape_fn(t, |j| (base[j] - 2.0 * sd * phi[j]).max(0.0));
            Ok(EffectCurves { base, plus, minus })
        }
    }
}

/// Write `effects_<method>.csv` with columns component,time,base,plus,minus.
/// All methods are emitted on the observation scale, so GFPCA curves are
/// back-transformed via exp(.) - 1.
pub fn write_effects_csv(decomp: &Decomposition, out: &mut dyn Write) -> Result<()> {
    writeln!(out, "component,time,base,plus,minus")?;
    for k in 1..=decomp.n_components() {
        let curves = effect_curves(decomp, k)?;
        for (j, &t) in decomp.grid.iter().enumerate() {
            let (base, plus, minus) = match decomp.method {
                Method::Gfpca => (
                    (curves.base[j].exp() - 1.0).max(0.0),
                    (curves.plus[j].exp() - 1.0).max(0.0),
                    (curves.minus[j].exp() - 1.0).max(0.0),
                ),
                _ => (curves.base[j], curves.plus[j], curves.minus[j]),
            };
            writeln!(out, "{k},{t},{base},{plus},{minus}")?;
        }
    }
    Ok(())
}

/// Write `mae_<method>.csv` with columns subject_id,method,mae.
pub fn write_mae_csv(decomp: &Decomposition, observed: ArrayView2<u64>, out: &mut dyn Write) -> Result<()> {
    let mae = mae_per_subject(decomp.fitted.view(), observed)?;
    writeln!(out, "subject_id,method,mae")?;
    for (id, m) in decomp.subject_ids.iter().zip(mae.iter()) {
        writeln!(out, "{id},{},{m}", decomp.method.as_str())?;
    }
    Ok(())
}

/// Read a `mae_<method>.csv` back: returns (method, per-subject mae).
pub fn read_mae_csv(path: &Path) -> Result<(String, Vec<f64>)> {
    let text = std::fs::read_to_string(path)?;
    let mut lines = text.lines();
    let header = lines.next().unwrap_or("");
    if header != "subject_id,method,mae" {
        return Err(Error::Csv {
            path: path.display().to_string(),
            msg: "expected header subject_id,method,mae".into(),
        });
    }
    let mut method = String::new();
    let mut values = Vec::new();
    for line in lines {
        if line.trim().is_empty() {
            continue;
        }
        let parts: Vec<&str> = line.split(',').collect();
        if parts.len() != 3 {
            return Err(Error::Csv {
                path: path.display().to_string(),
                msg: format!("bad row '{line}'"),
            });
        }
        method = parts[1].to_string();
        values.push(parts[2].parse::<f64>().map_err(|_| Error::Csv {
            path: path.display().to_string(),
            msg: format!("bad mae '{}'", parts[2]),
        })?);
    }
    Ok((method, values))
}

/// Largest principal angle (in degrees) between the spans of two component
/// sets under the grid quadrature inner product.
pub fn principal_angle_degrees(a: ArrayView2<f64>, b: ArrayView2<f64>, grid: &[f64]) -> f64 {
    assert_eq!(a.ncols(), grid.len());
    assert_eq!(b.ncols(), grid.len());
    assert_eq!(a.nrows(), b.nrows(), "subspaces must share dimension");
    let w = trapezoid_weights(grid);
    let ws = w.mapv(f64::sqrt);
    let k = a.nrows();
    let t = grid.len();
    // orthonormal bases in the weighted geometry
    let to_euclid = |m: ArrayView2<f64>| -> Array2<f64> {
        let mut out = Array2::zeros((t, k));
        for c in 0..k {
            for j in 0..t {
                out[[j, c]] = m[[c, j]] * ws[j];
            }
        }
        // Gram-Schmidt columns
        for c in 0..k {
            for p in 0..c {
                let proj: f64 = (0..t).map(|j| out[[j, c]] * out[[j, p]]).sum();
                for j in 0..t {
                    out[[j, c]] -= proj * out[[j, p]];
                }
            }
            let norm: f64 = (0..t).map(|j| out[[j, c]].powi(2)).sum::<f64>().sqrt();
            assert!(norm > 1e-12, "degenerate subspace basis");
            for j in 0..t {
                out[[j, c]] /= norm;
            }
        }
        out
    };
    let qa = to_euclid(a);
    let qb = to_euclid(b);
    let cross = qa.t().dot(&qb); // K x K
    // singular values via eigenvalues of cross' cross
    let gram = cross.t().dot(&cross);
    let (vals, _) = sym_eigen_desc(&gram);
    let smallest = vals[k - 1].max(0.0).min(1.0);
    smallest.sqrt().acos().to_degrees()
}
