//! Survey-weighted ROC curve and AUC.
//!
//! Each subject contributes its survey weight to the true/false-positive
//! tallies. Tied predicted probabilities get half credit in the
//! concordance, which makes the trapezoid area under the weighted ROC equal
//! to the weighted pairwise concordance.

use crate::error::{Error, Result};
use std::io::Write;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RocPoint {
    pub threshold: f64,
    pub fpr: f64,
    pub tpr: f64,
}

fn validate(prob: &[f64], label: &[u8], weight: &[f64]) -> Result<()> {
    if prob.len() != label.len() || prob.len() != weight.len() {
        return Err(Error::dim(format!(
            "prob/label/weight lengths differ: {}/{}/{}",
            prob.len(),
            label.len(),
            weight.len()
        )));
    }
    if weight.iter().any(|&w| !(w > 0.0)) {
        return Err(Error::invalid("weights must be positive"));
    }
    if label.iter().any(|&y| y > 1) {
        return Err(Error::invalid("labels must be 0 or 1"));
    }
    let pos = label.iter().any(|&y| y == 1);
    let neg = label.iter().any(|&y| y == 0);
    if !pos || !neg {
        return Err(Error::SingleClass(
            "ROC needs both classes present".into(),
        ));
    }
    Ok(())
}

/// Weighted ROC curve: one point per distinct predicted probability, in
/// descending threshold order, beginning at (0, 0).
pub fn weighted_roc(prob: &[f64], label: &[u8], weight: &[f64]) -> Result<Vec<RocPoint>> {
    validate(prob, label, weight)?;
    let mut order: Vec<usize> = (0..prob.len()).collect();
    order.sort_by(|&a, &b| prob[b].partial_cmp(&prob[a]).unwrap().then(a.cmp(&b)));
    let total_pos: f64 = label
        .iter()
        .zip(weight.iter())
        .filter(|(&y, _)| y == 1)
        .map(|(_, &w)| w)
        .sum();
    let total_neg: f64 = label
        .iter()
        .zip(weight.iter())
        .filter(|(&y, _)| y == 0)
        .map(|(_, &w)| w)
        .sum();
    let mut curve = vec![RocPoint {
        threshold: f64::INFINITY,
        fpr: 0.0,
        tpr: 0.0,
    }];
    let mut tp = 0.0;
    let mut fp = 0.0;
    let mut idx = 0;
    while idx < order.len() {
        let threshold = prob[order[idx]];
        // absorb the whole tie group
        while idx < order.len() && prob[order[idx]] == threshold {
            let i = order[idx];
            if label[i] == 1 {
                tp += weight[i];
            } else {
                fp += weight[i];
            }
            idx += 1;
        }
        curve.push(RocPoint {
            threshold,
            fpr: fp / total_neg,
            tpr: tp / total_pos,
        });
    }
    Ok(curve)
}

/// Trapezoid area under the weighted ROC curve.
pub fn auc_from_roc(curve: &[RocPoint]) -> f64 {
    let mut area = 0.0;
    for w in curve.windows(2) {
        area += (w[1].fpr - w[0].fpr) * (w[1].tpr + w[0].tpr) / 2.0;
    }
    area
}

/// Weighted AUC from raw predictions.
pub fn weighted_auc(prob: &[f64], label: &[u8], weight: &[f64]) -> Result<f64> {
    Ok(auc_from_roc(&weighted_roc(prob, label, weight)?))
}

/// Brute-force weighted concordance: sum over (positive, negative) pairs of
/// w_i w_j [1(p_i > p_j) + 1/2 1(p_i = p_j)], normalized. O(n^2); the test
/// oracle for `weighted_auc`.
pub fn concordance_oracle(prob: &[f64], label: &[u8], weight: &[f64]) -> Result<f64> {
    validate(prob, label, weight)?;
    let mut num = 0.0;
    let mut wpos = 0.0;
    let mut wneg = 0.0;
    for i in 0..prob.len() {
        if label[i] == 1 {
            wpos += weight[i];
        } else {
            wneg += weight[i];
        }
    }
    for i in 0..prob.len() {
        if label[i] != 1 {
            continue;
        }
        for j in 0..prob.len() {
            if label[j] != 0 {
                continue;
            }
            let credit = if prob[i] > prob[j] {
                1.0
            } else if prob[i] == prob[j] {
                0.5
            } else {
                0.0
            };
            num += weight[i] * weight[j] * credit;
        }
    }
    Ok(num / (wpos * wneg))
}

/// Write a ROC curve as CSV with columns threshold,fpr,tpr.
pub fn write_roc_csv(curve: &[RocPoint], out: &mut dyn Write) -> Result<()> {
    writeln!(out, "threshold,fpr,tpr")?;
    for p in curve {
        writeln!(out, "{},{},{}", p.threshold, p.fpr, p.tpr)?;
    }
    Ok(())
}
