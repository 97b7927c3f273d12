//! Survey-weighted mortality classifiers: weighted logistic regression with
//! backward-stepwise AIC score selection, a case-weighted random forest, and
//! exponential-loss boosting, plus the stratified train/test split.

mod adaboost;
mod forest;
mod logistic;
mod tree;

pub use adaboost::{fit_adaboost, AdaboostModel, AdaboostOptions};
pub use forest::{fit_random_forest, ForestModel, ForestOptions};
pub use logistic::{fit_weighted_logistic, stepwise_aic, LogisticModel, LogisticOptions};

use crate::decomposition::Decomposition;
use crate::error::{Error, Result};
use crate::ingest::{adjust_weights, SubjectCovariates};
use crate::rng::stream_rng;
use ndarray::{Array2, ArrayView2};
use rand::seq::SliceRandom;
use std::collections::HashMap;

/// Design-ready features, adjusted weights, and outcomes for the
/// classifiers. Categorical covariates are dummy coded against the
/// reference levels of the coefficient tables (White, Male, Less than High
/// School, Never smoker, No comorbidity), whose columns are absent.
#[derive(Debug, Clone)]
pub struct PredictorTable {
    pub subject_ids: Vec<String>,
    pub feature_names: Vec<String>,
    /// N x P, no intercept column.
    pub features: Array2<f64>,
    /// Indices of FPC-score columns (the stepwise candidates).
    pub score_columns: Vec<usize>,
    /// Adjusted survey weights, mean one.
    pub weights: Vec<f64>,
    pub outcome: Vec<u8>,
}

pub const COVARIATE_FEATURES: &[&str] = &[
    "n_weekdays",
    "n_weekend_days",
    "bmi",
    "race_black",
    "race_hispanic",
    "race_other",
    "gender_female",
    "age",
    "education_high_school",
    "education_college_and_above",
    "drinks_per_week",
    "smoking_former",
    "smoking_current",
    "diabetes_yes",
    "chf_yes",
    "chd_yes",
    "cancer_yes",
    "stroke_yes",
    "hdl_cholesterol",
    "total_cholesterol",
    "systolic_bp",
];

impl PredictorTable {
    /// Build the table from covariates, optionally joining FPC scores by
    /// subject id.
    pub fn build(covs: &[SubjectCovariates], scores: Option<&Decomposition>) -> Result<PredictorTable> {
        if covs.is_empty() {
            return Err(Error::invalid("no subjects"));
        }
        let k = scores.map(|d| d.n_components()).unwrap_or(0);
        let score_rows: Option<HashMap<&str, usize>> = scores.map(|d| {
            d.subject_ids
                .iter()
                .enumerate()
                .map(|(i, id)| (id.as_str(), i))
                .collect()
        });
        let n = covs.len();
        let p = COVARIATE_FEATURES.len() + k;
        let mut features = Array2::zeros((n, p));
        let mut feature_names: Vec<String> = COVARIATE_FEATURES.iter().map(|s| s.to_string()).collect();
        for c in 1..=k {
            feature_names.push(format!("score_{c}"));
        }
        let mut outcome = Vec::with_capacity(n);
        let raw_weights: Vec<f64> = covs.iter().map(|c| c.raw_survey_weight).collect();
        let weights = adjust_weights(&raw_weights)?;
        for (i, cov) in covs.iter().enumerate() {
            use crate::ingest::{Education, Gender, Race, Smoking, YesNo};
            let row = [
                cov.n_weekdays,
                cov.n_weekend_days,
                cov.bmi,
                (cov.race == Race::Black) as u8 as f64,
                (cov.race == Race::Hispanic) as u8 as f64,
                (cov.race == Race::Other) as u8 as f64,
                (cov.gender == Gender::Female) as u8 as f64,
                cov.age,
                (cov.education == Education::HighSchool) as u8 as f64,
                (cov.education == Education::CollegeAndAbove) as u8 as f64,
                cov.drinks_per_week,
                (cov.smoking == Smoking::Former) as u8 as f64,
                (cov.smoking == Smoking::Current) as u8 as f64,
                (cov.diabetes == YesNo::Yes) as u8 as f64,
                (cov.chf == YesNo::Yes) as u8 as f64,
                (cov.chd == YesNo::Yes) as u8 as f64,
                (cov.cancer == YesNo::Yes) as u8 as f64,
                (cov.stroke == YesNo::Yes) as u8 as f64,
                cov.hdl_cholesterol,
                cov.total_cholesterol,
                cov.systolic_bp,
            ];
            for (j, &v) in row.iter().enumerate() {
                features[[i, j]] = v;
            }
            if let (Some(rows), Some(d)) = (&score_rows, scores) {
                let src = *rows.get(cov.subject_id.as_str()).ok_or_else(|| {
                    Error::invalid(format!(
                        "subject {} has no scores in the decomposition",
                        cov.subject_id
                    ))
                })?;
                for c in 0..k {
                    features[[i, COVARIATE_FEATURES.len() + c]] = d.scores[[src, c]];
                }
            }
            outcome.push(cov.mortality);
        }
        Ok(PredictorTable {
            subject_ids: covs.iter().map(|c| c.subject_id.clone()).collect(),
            feature_names,
            features,
            score_columns: (0..k).map(|c| COVARIATE_FEATURES.len() + c).collect(),
            weights,
            outcome,
        })
    }

    /// Assemble a table directly from parts (used by tests and simulations).
    pub fn from_parts(
        subject_ids: Vec<String>,
        feature_names: Vec<String>,
        features: Array2<f64>,
        score_columns: Vec<usize>,
        weights: Vec<f64>,
        outcome: Vec<u8>,
    ) -> Result<PredictorTable> {
        let n = features.nrows();
        if subject_ids.len() != n || weights.len() != n || outcome.len() != n {
            return Err(Error::dim("table parts disagree on row count"));
        }
        if feature_names.len() != features.ncols() {
            return Err(Error::dim("feature names do not match columns"));
        }
        if score_columns.iter().any(|&c| c >= features.ncols()) {
            return Err(Error::invalid("score column index out of range"));
        }
        Ok(PredictorTable {
            subject_ids,
            feature_names,
            features,
            score_columns,
            weights,
            outcome,
        })
    }

    /// The same table keeping only the given score columns (all covariate
    /// columns stay).
    pub fn with_score_subset(&self, selected: &[usize]) -> PredictorTable {
        let drop: Vec<usize> = self
            .score_columns
            .iter()
            .copied()
            .filter(|c| !selected.contains(c))
            .collect();
        let keep: Vec<usize> = (0..self.features.ncols()).filter(|c| !drop.contains(c)).collect();
        let features = Array2::from_shape_fn((self.features.nrows(), keep.len()), |(i, j)| {
            self.features[[i, keep[j]]]
        });
        let feature_names = keep.iter().map(|&c| self.feature_names[c].clone()).collect();
        let score_columns = keep
            .iter()
            .enumerate()
            .filter(|(_, &c)| self.score_columns.contains(&c))
            .map(|(new_idx, _)| new_idx)
            .collect();
        PredictorTable {
            subject_ids: self.subject_ids.clone(),
            feature_names,
            features,
            score_columns,
            weights: self.weights.clone(),
            outcome: self.outcome.clone(),
        }
    }

    /// Rows restricted to the given indices.
    pub fn subset_rows(&self, rows: &[usize]) -> PredictorTable {
        PredictorTable {
            subject_ids: rows.iter().map(|&i| self.subject_ids[i].clone()).collect(),
            feature_names: self.feature_names.clone(),
            features: Array2::from_shape_fn((rows.len(), self.features.ncols()), |(i, j)| {
                self.features[[rows[i], j]]
            }),
            score_columns: self.score_columns.clone(),
            weights: rows.iter().map(|&i| self.weights[i]).collect(),
            outcome: rows.iter().map(|&i| self.outcome[i]).collect(),
        }
    }

    pub fn n_rows(&self) -> usize {
        self.features.nrows()
    }
}

/// Class-stratified split: within each outcome class, floor(ratio * n)
/// shuffled indices go to train. Deterministic given the seed; returned
/// index lists are sorted.
pub fn stratified_split(outcomes: &[u8], ratio: f64, seed: u64) -> Result<(Vec<usize>, Vec<usize>)> {
    if !(0.0..=1.0).contains(&ratio) {
        return Err(Error::invalid("split ratio must be in [0, 1]"));
    }
    let mut train = Vec::new();
    let mut test = Vec::new();
    for class in [0u8, 1u8] {
        let mut members: Vec<usize> = outcomes
            .iter()
            .enumerate()
            .filter(|(_, &y)| y == class)
            .map(|(i, _)| i)
            .collect();
        if members.is_empty() {
            return Err(Error::SingleClass(format!("class {class} has no members")));
        }
        let mut rng = stream_rng(seed, class as u64);
        members.shuffle(&mut rng);
        let n_train = (ratio * members.len() as f64).floor() as usize;
        train.extend_from_slice(&members[..n_train]);
        test.extend_from_slice(&members[n_train..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    Ok((train, test))
}

/// One of the three fitted classifier kinds.
pub enum FittedClassifier {
    Logistic(LogisticModel),
    Forest(ForestModel),
    Adaboost(AdaboostModel),
}

impl FittedClassifier {
    pub fn kind(&self) -> &'static str {
        match self {
            FittedClassifier::Logistic(_) => "logistic",
            FittedClassifier::Forest(_) => "forest",
            FittedClassifier::Adaboost(_) => "adaboost",
        }
    }

    /// Class-1 probability for each feature row; always in [0, 1].
    pub fn predict_probability(&self, features: ArrayView2<f64>) -> Vec<f64> {
        match self {
            FittedClassifier::Logistic(m) => m.predict_probability(features),
            FittedClassifier::Forest(m) => m.predict_probability(features),
            FittedClassifier::Adaboost(m) => m.predict_probability(features),
        }
    }

    /// Split-based importance, normalized to max 100, descending.
    /// Logistic models report inference through CIs instead.
    pub fn variable_importance(&self) -> Result<Vec<(String, f64)>> {
        match self {
            FittedClassifier::Logistic(_) => Err(Error::invalid(
                "variable importance is not defined for the logistic model; use the coefficient table",
            )),
            FittedClassifier::Forest(m) => Ok(m.variable_importance()),
            FittedClassifier::Adaboost(m) => Ok(m.variable_importance()),
        }
    }
}

/// Shared helper: normalize raw importance mass to max = 100 and sort
/// descending (ties broken by name for determinism).
pub(crate) fn normalize_importance(names: &[String], raw: &[f64]) -> Vec<(String, f64)> {
    let max = raw.iter().copied().fold(0.0_f64, f64::max);
    let mut out: Vec<(String, f64)> = names
        .iter()
        .cloned()
        .zip(raw.iter().map(|&v| if max > 0.0 { v / max * 100.0 } else { 0.0 }))
        .filter(|(_, v)| *v > 0.0)
        .collect();
    out.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
    out
}
