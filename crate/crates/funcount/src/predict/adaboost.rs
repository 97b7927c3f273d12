//! Stagewise gradient boosting with exponential loss on +/-1 outcomes
//! (AdaBoost as gradient boosting). Each stage fits a depth-limited
//! regression tree to the negative gradient w_i y_i exp(-y_i F_i), then
//! takes a shrunken Newton step in every terminal region. The Newton leaf
//! value is tanh of the optimal value, so every stage decreases the
//! weighted training loss.

use super::tree::{grow_regression_tree, set_leaf_values, Node};
use super::{normalize_importance, PredictorTable};
use crate::error::{Error, Result};
use ndarray::ArrayView2;

#[derive(Debug, Clone)]
pub struct AdaboostOptions {
    pub n_trees: usize,
    pub depth: usize,
    pub shrinkage: f64,
    /// Minimum observations per terminal node.
    pub min_obs: usize,
    pub seed: u64,
}

impl Default for AdaboostOptions {
    fn default() -> Self {
        Self {
            n_trees: 100,
            depth: 1,
            shrinkage: 0.1,
            min_obs: 10,
            seed: 0,
        }
    }
}

pub struct AdaboostModel {
    pub intercept: f64,
    pub shrinkage: f64,
    trees: Vec<Node>,
    pub feature_names: Vec<String>,
    /// Exponential-loss reduction attributed to each feature.
    pub loss_importance: Vec<f64>,
    /// Weighted training loss after the intercept and after each stage.
    pub loss_trace: Vec<f64>,
}

impl AdaboostModel {
    pub fn decision_value(&self, row: ndarray::ArrayView1<f64>) -> f64 {
        let mut f = self.intercept;
        for tree in &self.trees {
            f += self.shrinkage * tree.predict_row(row);
        }
        f
    }

    /// Probability via the logistic transform of twice the decision value.
    pub fn predict_probability(&self, features: ArrayView2<f64>) -> Vec<f64> {
        (0..features.nrows())
            .map(|i| {
                let f = self.decision_value(features.row(i));
                1.0 / (1.0 + (-2.0 * f).exp())
            })
            .collect()
    }

    pub fn variable_importance(&self) -> Vec<(String, f64)> {
        normalize_importance(&self.feature_names, &self.loss_importance)
    }
}

pub fn fit_adaboost(table: &PredictorTable, opts: &AdaboostOptions) -> Result<AdaboostModel> {
    let n = table.n_rows();
    let p = table.features.ncols();
    if p == 0 {
        return Err(Error::invalid("boosting needs at least one feature"));
    }
    if opts.depth == 0 {
        return Err(Error::invalid("tree depth must be at least 1"));
    }
    let w = &table.weights;
    let y: Vec<f64> = table.outcome.iter().map(|&v| 2.0 * v as f64 - 1.0).collect();
    let wpos: f64 = (0..n).filter(|&i| y[i] > 0.0).map(|i| w[i]).sum();
    let wneg: f64 = (0..n).filter(|&i| y[i] < 0.0).map(|i| w[i]).sum();
    if wpos == 0.0 || wneg == 0.0 {
        return Err(Error::SingleClass(
            "boosting training data has a single outcome class".into(),
        ));
    }
    let intercept = 0.5 * (wpos / wneg).ln();
    let mut f: Vec<f64> = vec![intercept; n];
    let loss = |f: &[f64]| -> f64 { (0..n).map(|i| w[i] * (-y[i] * f[i]).exp()).sum() };
    let mut loss_trace = vec![loss(&f)];
    let mut loss_importance = vec![0.0; p];
    let mut trees = Vec::with_capacity(opts.n_trees);

    for _ in 0..opts.n_trees {
        let gradient: Vec<f64> = (0..n).map(|i| w[i] * y[i] * (-y[i] * f[i]).exp()).collect();
        let tree = grow_regression_tree(
            table.features.view(),
            &gradient,
            (0..n).collect(),
            opts.depth,
            opts.min_obs,
        );
        // Newton value per terminal region:
        //   gamma = sum w y e^{-yF} / sum w e^{-yF} = tanh(optimal value)
        let mut num = vec![0.0; tree.n_leaves];
        let mut den = vec![0.0; tree.n_leaves];
        for i in 0..n {
            let leaf = tree.root.leaf_of(table.features.row(i));
            let e = (-y[i] * f[i]).exp();
            num[leaf] += w[i] * y[i] * e;
            den[leaf] += w[i] * e;
        }
        let gamma: Vec<f64> = num
            .iter()
            .zip(den.iter())
            .map(|(&a, &b)| if b > 0.0 { a / b } else { 0.0 })
            .collect();
        let mut root = tree.root;
        set_leaf_values(&mut root, &gamma);
        for i in 0..n {
            f[i] += opts.shrinkage * root.predict_row(table.features.row(i));
        }
        let new_loss = loss(&f);
        let reduction = (loss_trace.last().unwrap() - new_loss).max(0.0);
        // attribute the stage's loss reduction to its splits, proportional
        // to their squared-error improvements
        let total_improvement: f64 = tree.splits.iter().map(|(_, imp)| imp).sum();
        if total_improvement > 0.0 {
            for &(feature, improvement) in &tree.splits {
                loss_importance[feature] += reduction * improvement / total_improvement;
            }
        }
        loss_trace.push(new_loss);
        trees.push(root);
    }
    Ok(AdaboostModel {
        intercept,
        shrinkage: opts.shrinkage,
        trees,
        feature_names: table.feature_names.clone(),
        loss_importance,
        loss_trace,
    })
}
