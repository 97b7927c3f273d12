//! Survey-weighted logistic regression by iteratively reweighted least
//! squares, with model-based covariance, complete-separation flagging, and
//! backward-stepwise AIC selection over the FPC-score columns.

use super::PredictorTable;
use crate::error::{Error, Result};
use crate::linalg::{solve_spd_ridged, spd_inverse};
use ndarray::{Array1, Array2, ArrayView2};

#[derive(Debug, Clone)]
pub struct LogisticOptions {
    pub max_iter: usize,
    /// Convergence on the max absolute coefficient update.
    pub tol: f64,
    /// |beta| beyond this, with deviance still falling, flags separation.
    pub separation_bound: f64,
}

impl Default for LogisticOptions {
    fn default() -> Self {
        Self {
            max_iter: 25,
            tol: 1e-8,
            separation_bound: 15.0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct LogisticModel {
    /// "intercept" followed by feature names.
    pub coefficient_names: Vec<String>,
    pub coefficients: Array1<f64>,
    /// Inverse weighted Fisher information at the fit.
    pub covariance: Array2<f64>,
    pub weighted_loglik: f64,
    pub aic: f64,
    /// Set when the fit ran into complete separation; coefficients are the
    /// last IRLS iterate, as reported.
    pub separation: bool,
    /// Score columns retained by stepwise selection (indices into the
    /// original table), when selection ran.
    pub selected_scores: Vec<usize>,
    pub converged: bool,
}

impl LogisticModel {
    /// 95% Wald intervals: (name, estimate, low, high). Entries for dummy
    /// reference levels are not present (their coefficients are fixed at 0).
    pub fn confidence_intervals(&self) -> Vec<(String, f64, f64, f64)> {
        self.coefficient_names
            .iter()
            .enumerate()
            .map(|(i, name)| {
                let se = self.covariance[[i, i]].max(0.0).sqrt();
                let b = self.coefficients[i];
                (name.clone(), b, b - 1.96 * se, b + 1.96 * se)
            })
            .collect()
    }

    pub fn predict_probability(&self, features: ArrayView2<f64>) -> Vec<f64> {
        let p = self.coefficients.len() - 1;
        assert_eq!(
            features.ncols(),
            p,
            "model has {p} features, input has {}",
            features.ncols()
        );
        (0..features.nrows())
            .map(|i| {
                let mut eta = self.coefficients[0];
                for j in 0..p {
                    eta += self.coefficients[j + 1] * features[[i, j]];
                }
                sigmoid(eta)
            })
            .collect()
    }
}

fn sigmoid(eta: f64) -> f64 {
    if eta >= 0.0 {
        1.0 / (1.0 + (-eta).exp())
    } else {
        let e = eta.exp();
        e / (1.0 + e)
    }
}

/// Columns that are (numerically) linear combinations of earlier columns,
/// found by modified Gram-Schmidt. Includes the implicit intercept.
fn aliased_columns(design: &Array2<f64>, names: &[String]) -> Vec<String> {
    let (n, p) = design.dim();
    let mut basis: Vec<Array1<f64>> = Vec::new();
    let mut aliased = Vec::new();
    for j in 0..p {
        let mut v: Array1<f64> = design.column(j).to_owned();
        let orig_norm = v.dot(&v).sqrt().max(1e-300);
        for b in &basis {
            let proj = v.dot(b);
            v.scaled_add(-proj, b);
        }
        let norm = v.dot(&v).sqrt();
        if norm / orig_norm < 1e-8 || norm < 1e-10 * (n as f64).sqrt() {
            aliased.push(names[j].clone());
        } else {
            basis.push(v.mapv(|x| x / norm));
        }
    }
    aliased
}

fn weighted_deviance(y: &[u8], w: &[f64], p: &Array1<f64>) -> f64 {
    let mut dev = 0.0;
    for i in 0..y.len() {
        let pi = p[i].clamp(1e-12, 1.0 - 1e-12);
        dev -= 2.0
            * w[i]
            * if y[i] == 1 { pi.ln() } else { (1.0 - pi).ln() };
    }
    dev
}

/// Fit the weighted logistic regression on all columns of the table.
pub fn fit_weighted_logistic(table: &PredictorTable, opts: &LogisticOptions) -> Result<LogisticModel> {
    let n = table.n_rows();
    let p = table.features.ncols() + 1;
    if n < p {
        return Err(Error::invalid(format!(
            "{n} rows cannot identify {p} coefficients"
        )));
    }
    if table.outcome.iter().all(|&y| y == 1) || table.outcome.iter().all(|&y| y == 0) {
        return Err(Error::SingleClass("logistic fit needs both outcomes".into()));
    }
    let mut design = Array2::ones((n, p));
    for i in 0..n {
        for j in 0..p - 1 {
            design[[i, j + 1]] = table.features[[i, j]];
        }
    }
    let mut names = vec!["intercept".to_string()];
    names.extend(table.feature_names.iter().cloned());
    let aliased = aliased_columns(&design, &names);
    if !aliased.is_empty() {
        return Err(Error::RankDeficient(aliased));
    }

    let y = &table.outcome;
    let w = &table.weights;
    let mut beta = Array1::zeros(p);
    let mut probs: Array1<f64> = design.dot(&beta).mapv(sigmoid);
    let mut deviance = weighted_deviance(y, w, &probs);
    let mut deviance_monotone = true;
    let mut converged = false;
    for _ in 0..opts.max_iter {
        // score and weighted Fisher information
        let mut grad = Array1::zeros(p);
        let mut info = Array2::zeros((p, p));
        for i in 0..n {
            let resid = w[i] * (y[i] as f64 - probs[i]);
            let fisher = w[i] * probs[i] * (1.0 - probs[i]);
            for a in 0..p {
                grad[a] += resid * design[[i, a]];
                if fisher > 0.0 {
                    for b in 0..p {
                        info[[a, b]] += fisher * design[[i, a]] * design[[i, b]];
                    }
                }
            }
        }
        let delta = solve_spd_ridged(&info, &grad);
        // step halving keeps the deviance path monotone
        let mut step = 1.0;
        let mut accepted = false;
        for _ in 0..30 {
            let cand = &beta + &delta.mapv(|v| v * step);
            let cand_probs: Array1<f64> = design.dot(&cand).mapv(sigmoid);
            let cand_dev = weighted_deviance(y, w, &cand_probs);
            if cand_dev.is_finite() && cand_dev <= deviance + 1e-10 * (1.0 + deviance.abs()) {
                if cand_dev > deviance {
                    deviance_monotone = deviance_monotone && (cand_dev - deviance) < 1e-8;
                }
                let max_step = delta.iter().fold(0.0_f64, |m, &d| m.max((d * step).abs()));
                beta = cand;
                probs = cand_probs;
                deviance = cand_dev.min(deviance);
                accepted = true;
                if max_step < opts.tol {
                    converged = true;
                }
                break;
            }
            step *= 0.5;
        }
        if !accepted {
            converged = true; // cannot improve further at double precision
        }
        if converged {
            break;
        }
    }

    let max_abs_beta = beta.iter().fold(0.0_f64, |m, &b| m.max(b.abs()));
    let separation = max_abs_beta > opts.separation_bound && deviance_monotone;
    if !converged && !separation {
        return Err(Error::NonConvergence {
            context: "weighted logistic IRLS".into(),
            iterations: opts.max_iter,
            last: beta.to_vec(),
        });
    }

    let mut info = Array2::zeros((p, p));
    for i in 0..n {
        let fisher = w[i] * probs[i] * (1.0 - probs[i]);
        for a in 0..p {
            for b in 0..p {
                info[[a, b]] += fisher * design[[i, a]] * design[[i, b]];
            }
        }
    }
    let covariance = spd_inverse(&info).unwrap_or_else(|| {
        let mut ridged = info.clone();
        let scale = (0..p).map(|i| info[[i, i]]).fold(0.0_f64, f64::max).max(1.0);
        for i in 0..p {
            ridged[[i, i]] += 1e-10 * scale;
        }
        spd_inverse(&ridged).expect("ridged information must invert")
    });

    let mut loglik = 0.0;
    for i in 0..n {
        let pi = probs[i].clamp(1e-12, 1.0 - 1e-12);
        loglik += w[i] * if y[i] == 1 { pi.ln() } else { (1.0 - pi).ln() };
    }
    let aic = -2.0 * loglik + 2.0 * p as f64;
    Ok(LogisticModel {
        coefficient_names: names,
        coefficients: beta,
        covariance,
        weighted_loglik: loglik,
        aic,
        separation,
        selected_scores: table.score_columns.clone(),
        converged: converged || separation,
    })
}

/// Backward-stepwise AIC over the score columns: starting from the full
/// model, repeatedly drop the score whose removal lowers AIC the most.
/// Covariates are never dropped. Returns the selected score columns
/// (indices into the original table) and the final fit.
pub fn stepwise_aic(table: &PredictorTable, opts: &LogisticOptions) -> Result<(Vec<usize>, LogisticModel)> {
    let mut selected: Vec<usize> = table.score_columns.clone();
    let mut current = fit_weighted_logistic(&table.with_score_subset(&selected), opts)?;
    loop {
        let mut best: Option<(usize, LogisticModel)> = None;
        for (pos, _) in selected.iter().enumerate() {
            let mut reduced = selected.clone();
            reduced.remove(pos);
            let candidate = fit_weighted_logistic(&table.with_score_subset(&reduced), opts)?;
            if candidate.aic < current.aic
                && best.as_ref().map_or(true, |(_, b)| candidate.aic < b.aic)
            {
                best = Some((pos, candidate));
            }
        }
        match best {
            Some((pos, model)) => {
                selected.remove(pos);
                current = model;
            }
            None => break,
        }
    }
    current.selected_scores = selected.clone();
    Ok((selected, current))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array2;

    fn table(features: Array2<f64>, weights: Vec<f64>, outcome: Vec<u8>) -> PredictorTable {
        let n = features.nrows();
        let p = features.ncols();
        PredictorTable::from_parts(
            (0..n).map(|i| format!("s{i}")).collect(),
            (0..p).map(|j| format!("x{j}")).collect(),
            features,
            vec![],
            weights,
            outcome,
        )
        .unwrap()
    }

    #[test]
    fn intercept_only_recovers_logit_of_mean() {
        let n = 40;
        let outcome: Vec<u8> = (0..n).map(|i| (i % 4 == 0) as u8).collect(); // p = 0.25
        let t = table(Array2::zeros((n, 0)), vec![1.0; n], outcome);
        let model = fit_weighted_logistic(&t, &LogisticOptions::default()).unwrap();
        let expect = (0.25_f64 / 0.75).ln();
        assert!((model.coefficients[0] - expect).abs() < 1e-8, "{}", model.coefficients[0]);
    }

    #[test]
    fn duplication_equals_weight_doubling() {
        let base = Array2::from_shape_fn((30, 2), |(i, j)| {
            ((i * 7 + j * 3) % 11) as f64 / 3.0 - 1.5
        });
        let outcome: Vec<u8> = (0..30).map(|i| ((i * 5 + 3) % 7 < 3) as u8).collect();
        // duplicate row 4
        let mut dup_feats = Array2::zeros((31, 2));
        for i in 0..30 {
            for j in 0..2 {
                dup_feats[[i, j]] = base[[i, j]];
            }
        }
        for j in 0..2 {
            dup_feats[[30, j]] = base[[4, j]];
        }
        let mut dup_outcome = outcome.clone();
        dup_outcome.push(outcome[4]);
        let dup = table(dup_feats, vec![1.0; 31], dup_outcome);

        let mut weights = vec![1.0; 30];
        weights[4] = 2.0;
        let weighted = table(base, weights, outcome);

        let m1 = fit_weighted_logistic(&dup, &LogisticOptions::default()).unwrap();
        let m2 = fit_weighted_logistic(&weighted, &LogisticOptions::default()).unwrap();
        for (a, b) in m1.coefficients.iter().zip(m2.coefficients.iter()) {
            assert!((a - b).abs() < 1e-8, "{a} vs {b}");
        }
    }

    #[test]
    fn score_equation_holds_at_convergence() {
        let n = 60;
        let feats = Array2::from_shape_fn((n, 2), |(i, j)| {
            (((i * 13 + j * 5) % 17) as f64 - 8.0) / 4.0
        });
        let mut state = 5u64;
        let mut unif = move || {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            (state >> 11) as f64 / (1u64 << 53) as f64
        };
        let outcome: Vec<u8> = (0..n)
            .map(|i| {
                let eta = 1.2 * feats[[i, 0]] - 0.8 * feats[[i, 1]];
                (unif() < sigmoid(eta)) as u8
            })
            .collect();
        let weights: Vec<f64> = (0..n).map(|i| 0.5 + (i % 4) as f64 * 0.5).collect();
        let t = table(feats.clone(), weights.clone(), outcome.clone());
        let model = fit_weighted_logistic(&t, &LogisticOptions::default()).unwrap();
        let probs = model.predict_probability(feats.view());
        // design' (w * (y - p)) must vanish, including the intercept row
        let mut worst = 0.0_f64;
        let mut g0 = 0.0;
        let mut g = vec![0.0; 2];
        for i in 0..n {
            let r = weights[i] * (outcome[i] as f64 - probs[i]);
            g0 += r;
            for j in 0..2 {
                g[j] += r * feats[[i, j]];
            }
        }
        worst = worst.max(g0.abs()).max(g[0].abs()).max(g[1].abs());
        assert!(worst < 1e-6, "score equation residual {worst}");
    }

    #[test]
    fn rank_deficiency_lists_aliased_columns() {
        let mut feats = Array2::zeros((20, 3));
        for i in 0..20 {
            feats[[i, 0]] = i as f64;
            feats[[i, 1]] = 2.0 * i as f64; // aliased with column 0
            feats[[i, 2]] = (i % 2) as f64;
        }
        let outcome: Vec<u8> = (0..20).map(|i| (i % 3 == 0) as u8).collect();
        let t = table(feats, vec![1.0; 20], outcome);
        match fit_weighted_logistic(&t, &LogisticOptions::default()) {
            Err(Error::RankDeficient(cols)) => assert_eq!(cols, vec!["x1"]),
            other => panic!("expected rank deficiency, got {other:?}"),
        }
    }

    #[test]
    fn complete_separation_is_flagged_not_fatal() {
        let n = 30;
        let feats = Array2::from_shape_fn((n, 1), |(i, _)| i as f64 - 15.0);
        let outcome: Vec<u8> = (0..n).map(|i| (i >= 15) as u8).collect();
        let t = table(feats, vec![1.0; n], outcome);
        let model = fit_weighted_logistic(&t, &LogisticOptions::default()).unwrap();
        assert!(model.separation, "separation should be flagged");
        assert!(model.coefficients[1] > 1.0);
    }

    #[test]
    fn stepwise_keeps_empty_candidate_set_empty() {
        let n = 50;
        let feats = Array2::from_shape_fn((n, 1), |(i, _)| ((i % 9) as f64 - 4.0) / 2.0);
        let outcome: Vec<u8> = (0..n).map(|i| ((i % 9) > 4) as u8).collect();
        let t = table(feats, vec![1.0; n], outcome);
        let (selected, model) = stepwise_aic(&t, &LogisticOptions::default()).unwrap();
        assert!(selected.is_empty());
        assert_eq!(model.coefficient_names.len(), 2);
    }

    #[test]
    fn stepwise_aic_never_exceeds_full_model() {
        // two covariates + two noise scores
        let n = 80;
        let mut feats = Array2::zeros((n, 4));
        let mut state = 99u64;
        let mut next = move || {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            (state >> 11) as f64 / (1u64 << 53) as f64 - 0.5
        };
        let mut outcome = Vec::with_capacity(n);
        for i in 0..n {
            for j in 0..4 {
                feats[[i, j]] = next() * 2.0;
            }
            let eta = 1.5 * feats[[i, 0]] - 0.1;
            outcome.push((next() < sigmoid(eta)) as u8);
        }
        let t = PredictorTable::from_parts(
            (0..n).map(|i| format!("s{i}")).collect(),
            vec!["age".into(), "bmi".into(), "score_1".into(), "score_2".into()],
            feats,
            vec![2, 3],
            vec![1.0; n],
            outcome,
        )
        .unwrap();
        let full = fit_weighted_logistic(&t, &LogisticOptions::default()).unwrap();
        let (_, selected_model) = stepwise_aic(&t, &LogisticOptions::default()).unwrap();
        assert!(selected_model.aic <= full.aic + 1e-12);
    }
}
