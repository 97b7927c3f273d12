//! Random forest with case weights entering through the bootstrap: each
//! tree's sample is drawn with probability proportional to the adjusted
//! survey weights, and the predicted probability is the mean of tree votes.

use super::tree::{grow_classification_tree, Node};
use super::{normalize_importance, PredictorTable};
use crate::error::{Error, Result};
use crate::rng::stream_rng;
use ndarray::ArrayView2;
use rand::Rng;
use rayon::prelude::*;

#[derive(Debug, Clone)]
pub struct ForestOptions {
    pub n_trees: usize,
    /// Candidate features per split; defaults to ceil(sqrt(p)).
    pub mtry: Option<usize>,
    /// Smallest node still considered for splitting.
    pub min_node: usize,
    pub seed: u64,
}

impl Default for ForestOptions {
    fn default() -> Self {
        Self {
            n_trees: 500,
            mtry: None,
            min_node: 10,
            seed: 0,
        }
    }
}

pub struct ForestModel {
    trees: Vec<Node>,
    pub feature_names: Vec<String>,
    /// Summed Gini decrease per feature across all trees.
    pub gini_importance: Vec<f64>,
}

impl ForestModel {
    pub fn n_trees(&self) -> usize {
        self.trees.len()
    }

    /// Fraction of trees voting class 1.
    pub fn predict_probability(&self, features: ArrayView2<f64>) -> Vec<f64> {
        (0..features.nrows())
            .map(|i| {
                let votes: f64 = self.trees.iter().map(|t| t.predict_row(features.row(i))).sum();
                votes / self.trees.len() as f64
            })
            .collect()
    }

    pub fn variable_importance(&self) -> Vec<(String, f64)> {
        normalize_importance(&self.feature_names, &self.gini_importance)
    }
}

/// Weighted bootstrap draw of `n` indices.
fn weighted_bootstrap(weights: &[f64], n: usize, rng: &mut rand_chacha::ChaCha8Rng) -> Vec<usize> {
    let mut cumulative = Vec::with_capacity(weights.len());
    let mut total = 0.0;
    for &w in weights {
        total += w;
        cumulative.push(total);
    }
    (0..n)
        .map(|_| {
            let target = rng.gen::<f64>() * total;
            cumulative.partition_point(|&c| c <= target).min(weights.len() - 1)
        })
        .collect()
}

pub fn fit_random_forest(table: &PredictorTable, opts: &ForestOptions) -> Result<ForestModel> {
    let n = table.n_rows();
    let p = table.features.ncols();
    if p == 0 {
        return Err(Error::invalid("forest needs at least one feature"));
    }
    if table.outcome.iter().all(|&y| y == 1) || table.outcome.iter().all(|&y| y == 0) {
        return Err(Error::SingleClass(
            "random forest training data has a single outcome class".into(),
        ));
    }
    let mtry = opts.mtry.unwrap_or_else(|| (p as f64).sqrt().ceil() as usize).clamp(1, p);
    let results: Vec<(Node, Vec<f64>)> = (0..opts.n_trees)
        .into_par_iter()
        .map(|t| {
            let mut rng = stream_rng(opts.seed, t as u64);
            let sample = weighted_bootstrap(&table.weights, n, &mut rng);
            let tree = grow_classification_tree(
                table.features.view(),
                &table.outcome,
                sample,
                mtry,
                opts.min_node,
                &mut rng,
            );
            (tree.root, tree.gini_decrease)
        })
        .collect();
    let mut trees = Vec::with_capacity(opts.n_trees);
    let mut gini_importance = vec![0.0; p];
    for (root, decrease) in results {
        trees.push(root);
        for (acc, d) in gini_importance.iter_mut().zip(decrease.iter()) {
            *acc += d;
        }
    }
    Ok(ForestModel {
        trees,
        feature_names: table.feature_names.clone(),
        gini_importance,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array2;

    fn threshold_table(n: usize, weights: Vec<f64>) -> PredictorTable {
        let features = Array2::from_shape_fn((n, 1), |(i, _)| i as f64);
        let outcome: Vec<u8> = (0..n).map(|i| (i >= n / 2) as u8).collect();
        PredictorTable::from_parts(
            (0..n).map(|i| format!("s{i}")).collect(),
            vec!["x".into()],
            features,
            vec![],
            weights,
            outcome,
        )
        .unwrap()
    }

    #[test]
    fn separable_data_trains_to_perfect_accuracy() {
        let table = threshold_table(60, vec![1.0; 60]);
        let opts = ForestOptions {
            n_trees: 50,
            seed: 5,
            ..Default::default()
        };
        let model = fit_random_forest(&table, &opts).unwrap();
        let probs = model.predict_probability(table.features.view());
        for (i, &p) in probs.iter().enumerate() {
            let predicted = (p >= 0.5) as u8;
            assert_eq!(predicted, table.outcome[i], "row {i} prob {p}");
        }
    }

    #[test]
    fn single_tree_votes_are_binary_and_probabilities_bounded() {
        let table = threshold_table(40, vec![1.0; 40]);
        let one = fit_random_forest(
            &table,
            &ForestOptions {
                n_trees: 1,
                seed: 2,
                ..Default::default()
            },
        )
        .unwrap();
        for p in one.predict_probability(table.features.view()) {
            assert!(p == 0.0 || p == 1.0);
        }
        let many = fit_random_forest(
            &table,
            &ForestOptions {
                n_trees: 25,
                seed: 2,
                ..Default::default()
            },
        )
        .unwrap();
        for p in many.predict_probability(table.features.view()) {
            assert!((0.0..=1.0).contains(&p));
        }
    }

    #[test]
    fn same_seed_reproduces_predictions() {
        let table = threshold_table(50, (0..50).map(|i| 0.5 + (i % 3) as f64).collect());
        let opts = ForestOptions {
            n_trees: 30,
            seed: 77,
            ..Default::default()
        };
        let a = fit_random_forest(&table, &opts).unwrap();
        let b = fit_random_forest(&table, &opts).unwrap();
        assert_eq!(
            a.predict_probability(table.features.view()),
            b.predict_probability(table.features.view())
        );
    }

    #[test]
    fn single_class_is_rejected() {
        let features = Array2::zeros((10, 1));
        let table = PredictorTable::from_parts(
            (0..10).map(|i| format!("s{i}")).collect(),
            vec!["x".into()],
            features,
            vec![],
            vec![1.0; 10],
            vec![1; 10],
        )
        .unwrap();
        assert!(fit_random_forest(&table, &ForestOptions::default()).is_err());
    }

    #[test]
    fn weight_doubling_approximates_duplication() {
        // Monte Carlo equivalence on mean predicted probabilities
        let n = 40;
        let features = Array2::from_shape_fn((n, 1), |(i, _)| (i % 10) as f64);
        let outcome: Vec<u8> = (0..n).map(|i| ((i % 10) >= 5) as u8).collect();
        let ids: Vec<String> = (0..n).map(|i| format!("s{i}")).collect();

        // doubled weight on rows 0..5
        let mut weights = vec![1.0; n];
        for w in weights.iter_mut().take(5) {
            *w = 2.0;
        }
        let weighted = PredictorTable::from_parts(
            ids.clone(),
            vec!["x".into()],
            features.clone(),
            vec![],
            weights,
            outcome.clone(),
        )
        .unwrap();

        // duplicated rows 0..5
        let mut dup_rows: Vec<usize> = (0..n).collect();
        dup_rows.extend(0..5);
        let dup_features = Array2::from_shape_fn((n + 5, 1), |(i, j)| features[[dup_rows[i], j]]);
        let dup_outcome: Vec<u8> = dup_rows.iter().map(|&i| outcome[i]).collect();
        let duplicated = PredictorTable::from_parts(
            (0..n + 5).map(|i| format!("d{i}")).collect(),
            vec!["x".into()],
            dup_features,
            vec![],
            vec![1.0; n + 5],
            dup_outcome,
        )
        .unwrap();

        let grid = Array2::from_shape_fn((10, 1), |(i, _)| i as f64);
        let mut gap = 0.0;
        let seeds = 50;
        for seed in 0..seeds {
            let opts = ForestOptions {
                n_trees: 60,
                seed,
                ..Default::default()
            };
            let a = fit_random_forest(&weighted, &opts).unwrap().predict_probability(grid.view());
            let b = fit_random_forest(&duplicated, &opts)
                .unwrap()
                .predict_probability(grid.view());
            gap += a
                .iter()
                .zip(b.iter())
                .map(|(x, y)| (x - y).abs())
                .sum::<f64>()
                / 10.0;
        }
        gap /= seeds as f64;
        assert!(gap < 0.05, "average probability gap {gap}");
    }

    #[test]
    fn importance_normalizes_to_100() {
        let n = 60;
        // feature 0 is pure signal, feature 1 is constant noise
        let features = Array2::from_shape_fn((n, 2), |(i, j)| {
            if j == 0 { i as f64 } else { (i % 2) as f64 }
        });
        let outcome: Vec<u8> = (0..n).map(|i| (i >= 30) as u8).collect();
        let table = PredictorTable::from_parts(
            (0..n).map(|i| format!("s{i}")).collect(),
            vec!["signal".into(), "noise".into()],
            features,
            vec![],
            vec![1.0; n],
            outcome,
        )
        .unwrap();
        let model = fit_random_forest(
            &table,
            &ForestOptions {
                n_trees: 40,
                seed: 11,
                ..Default::default()
            },
        )
        .unwrap();
        let imp = model.variable_importance();
        assert_eq!(imp[0].0, "signal");
        assert!((imp[0].1 - 100.0).abs() < 1e-12);
        for (_, v) in &imp {
            assert!(*v >= 0.0 && *v <= 100.0);
        }
    }
}
