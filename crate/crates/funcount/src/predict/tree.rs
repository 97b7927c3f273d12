//! Decision trees backing the forest (weighted-Gini classification) and the
//! boosting stages (squared-error regression with a depth cap).

use ndarray::{ArrayView1, ArrayView2};
use rand::seq::SliceRandom;
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone)]
pub enum Node {
    Leaf {
        id: usize,
        value: f64,
    },
    Split {
        feature: usize,
        threshold: f64,
        left: Box<Node>,
        right: Box<Node>,
    },
}

impl Node {
    pub fn predict_row(&self, row: ArrayView1<f64>) -> f64 {
        match self {
            Node::Leaf { value, .. } => *value,
            Node::Split {
                feature,
                threshold,
                left,
                right,
            } => {
                if row[*feature] <= *threshold {
                    left.predict_row(row)
                } else {
                    right.predict_row(row)
                }
            }
        }
    }

    pub fn leaf_of(&self, row: ArrayView1<f64>) -> usize {
        match self {
            Node::Leaf { id, .. } => *id,
            Node::Split {
                feature,
                threshold,
                left,
                right,
            } => {
                if row[*feature] <= *threshold {
                    left.leaf_of(row)
                } else {
                    right.leaf_of(row)
                }
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Classification tree (random forest)
// ---------------------------------------------------------------------------

pub struct ClassificationTree {
    pub root: Node,
    /// Total Gini decrease per feature accumulated over this tree's splits.
    pub gini_decrease: Vec<f64>,
}

/// Grow a classification tree on a bootstrap sample (indices may repeat).
/// `min_node` is the smallest node that will still be considered for a
/// split; splits use Gini impurity over `mtry` random features.
pub fn grow_classification_tree(
    features: ArrayView2<f64>,
    labels: &[u8],
    sample: Vec<usize>,
    mtry: usize,
    min_node: usize,
    rng: &mut ChaCha8Rng,
) -> ClassificationTree {
    let p = features.ncols();
    let mut gini_decrease = vec![0.0; p];
    let mut next_leaf = 0usize;
    let root = split_class_node(
        features,
        labels,
        sample,
        mtry,
        min_node,
        rng,
        &mut gini_decrease,
        &mut next_leaf,
    );
    ClassificationTree {
        root,
        gini_decrease,
    }
}

/// 2 * pos * neg / n: Gini impurity times node mass.
fn gini_mass(n: f64, pos: f64) -> f64 {
    if n <= 0.0 {
        0.0
    } else {
        2.0 * pos * (n - pos) / n
    }
}

#[allow(clippy::too_many_arguments)]
fn split_class_node(
    features: ArrayView2<f64>,
    labels: &[u8],
    sample: Vec<usize>,
    mtry: usize,
    min_node: usize,
    rng: &mut ChaCha8Rng,
    gini_decrease: &mut [f64],
    next_leaf: &mut usize,
) -> Node {
    let n = sample.len();
    let pos = sample.iter().filter(|&&i| labels[i] == 1).count();
    let make_leaf = |next_leaf: &mut usize| {
        let id = *next_leaf;
        *next_leaf += 1;
        Node::Leaf {
            id,
            value: if 2 * pos > n { 1.0 } else { 0.0 },
        }
    };
    if n < min_node || pos == 0 || pos == n {
        return make_leaf(next_leaf);
    }
    // mtry random candidate features
    let p = features.ncols();
    let mut candidates: Vec<usize> = (0..p).collect();
    candidates.shuffle(rng);
    candidates.truncate(mtry.max(1).min(p));

    let parent_mass = gini_mass(n as f64, pos as f64);
    let mut best: Option<(f64, usize, f64)> = None; // (decrease, feature, threshold)
    let mut scratch: Vec<(f64, u8)> = Vec::with_capacity(n);
    for &f in &candidates {
        scratch.clear();
        scratch.extend(sample.iter().map(|&i| (features[[i, f]], labels[i])));
        scratch.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
        let mut left_n = 0.0;
        let mut left_pos = 0.0;
        for cut in 0..n - 1 {
            left_n += 1.0;
            left_pos += scratch[cut].1 as f64;
            if scratch[cut].0 == scratch[cut + 1].0 {
                continue;
            }
            let right_n = n as f64 - left_n;
            let right_pos = pos as f64 - left_pos;
            let decrease = parent_mass - gini_mass(left_n, left_pos) - gini_mass(right_n, right_pos);
            if decrease > best.map_or(1e-12, |(d, _, _)| d) {
                let threshold = (scratch[cut].0 + scratch[cut + 1].0) / 2.0;
                best = Some((decrease, f, threshold));
            }
        }
    }
    let Some((decrease, feature, threshold)) = best else {
        return make_leaf(next_leaf);
    };
    gini_decrease[feature] += decrease;
    let (left_idx, right_idx): (Vec<usize>, Vec<usize>) =
        sample.into_iter().partition(|&i| features[[i, feature]] <= threshold);
    let left = split_class_node(
        features,
        labels,
        left_idx,
        mtry,
        min_node,
        rng,
        gini_decrease,
        next_leaf,
    );
    let right = split_class_node(
        features,
        labels,
        right_idx,
        mtry,
        min_node,
        rng,
        gini_decrease,
        next_leaf,
    );
    Node::Split {
        feature,
        threshold,
        left: Box::new(left),
        right: Box::new(right),
    }
}

// ---------------------------------------------------------------------------
// Regression tree (boosting stages)
// ---------------------------------------------------------------------------

pub struct RegressionTree {
    pub root: Node,
    pub n_leaves: usize,
    /// (feature, squared-error improvement) per split, in build order.
    pub splits: Vec<(usize, f64)>,
}

/// Least-squares regression tree of limited depth; every split must leave
/// at least `min_obs` rows in each child.
pub fn grow_regression_tree(
    features: ArrayView2<f64>,
    targets: &[f64],
    sample: Vec<usize>,
    max_depth: usize,
    min_obs: usize,
) -> RegressionTree {
    let mut splits = Vec::new();
    let mut next_leaf = 0usize;
    let root = split_reg_node(
        features,
        targets,
        sample,
        max_depth,
        min_obs,
        &mut splits,
        &mut next_leaf,
    );
    RegressionTree {
        root,
        n_leaves: next_leaf,
        splits,
    }
}

fn split_reg_node(
    features: ArrayView2<f64>,
    targets: &[f64],
    sample: Vec<usize>,
    depth_left: usize,
    min_obs: usize,
    splits: &mut Vec<(usize, f64)>,
    next_leaf: &mut usize,
) -> Node {
    let n = sample.len();
    let total: f64 = sample.iter().map(|&i| targets[i]).sum();
    let make_leaf = |next_leaf: &mut usize| {
        let id = *next_leaf;
        *next_leaf += 1;
        Node::Leaf {
            id,
            value: if n > 0 { total / n as f64 } else { 0.0 },
        }
    };
    if depth_left == 0 || n < 2 * min_obs {
        return make_leaf(next_leaf);
    }
    // maximize S_l^2/n_l + S_r^2/n_r - S^2/n
    let parent_term = total * total / n as f64;
    let mut best: Option<(f64, usize, f64)> = None;
    let p = features.ncols();
    let mut scratch: Vec<(f64, f64)> = Vec::with_capacity(n);
    for f in 0..p {
        scratch.clear();
        scratch.extend(sample.iter().map(|&i| (features[[i, f]], targets[i])));
        scratch.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
        let mut left_sum = 0.0;
        for cut in 0..n - 1 {
            left_sum += scratch[cut].1;
            let left_n = cut + 1;
            if scratch[cut].0 == scratch[cut + 1].0 {
                continue;
            }
            if left_n < min_obs || n - left_n < min_obs {
                continue;
            }
            let right_sum = total - left_sum;
            let improvement = left_sum * left_sum / left_n as f64
                + right_sum * right_sum / (n - left_n) as f64
                - parent_term;
            if improvement > best.map_or(1e-12, |(d, _, _)| d) {
                let threshold = (scratch[cut].0 + scratch[cut + 1].0) / 2.0;
                best = Some((improvement, f, threshold));
            }
        }
    }
    let Some((improvement, feature, threshold)) = best else {
        return make_leaf(next_leaf);
    };
    splits.push((feature, improvement));
    let (left_idx, right_idx): (Vec<usize>, Vec<usize>) =
        sample.into_iter().partition(|&i| features[[i, feature]] <= threshold);
    let left = split_reg_node(features, targets, left_idx, depth_left - 1, min_obs, splits, next_leaf);
    let right = split_reg_node(features, targets, right_idx, depth_left - 1, min_obs, splits, next_leaf);
    Node::Split {
        feature,
        threshold,
        left: Box::new(left),
        right: Box::new(right),
    }
}

/// Replace every leaf value via its id.
pub fn set_leaf_values(node: &mut Node, values: &[f64]) {
    match node {
        Node::Leaf { id, value } => *value = values[*id],
        Node::Split { left, right, .. } => {
            set_leaf_values(left, values);
            set_leaf_values(right, values);
        }
    }
}
