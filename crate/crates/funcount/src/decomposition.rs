//! The common output type of the three decomposition methods, plus its JSON
//! form.
//!
//! JSON fields: `method`, `subject_ids`, `grid`, `mean` (absent for NARFD),
//! `components` (K arrays of T values), `eigenvalues` (absent for NARFD),
//! `scores` (N arrays of K values), `noise_var` (GFPCA only), `converged`.

use crate::error::{Error, Result};
use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Method {
    #[serde(rename = "GFPCA")]
    Gfpca,
    #[serde(rename = "PFPCA")]
    Pfpca,
    #[serde(rename = "NARFD")]
    Narfd,
}

impl Method {
    pub fn as_str(&self) -> &'static str {
        match self {
            Method::Gfpca => "gfpca",
            Method::Pfpca => "pfpca",
            Method::Narfd => "narfd",
        }
    }
}

impl std::str::FromStr for Method {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "gfpca" => Ok(Method::Gfpca),
            "pfpca" => Ok(Method::Pfpca),
            "narfd" => Ok(Method::Narfd),
            other => Err(Error::invalid(format!("unknown method '{other}'"))),
        }
    }
}

/// A fitted decomposition: K component functions on the grid, per-subject
/// scores, and fitted values on the observation scale.
#[derive(Debug, Clone)]
pub struct Decomposition {
    pub method: Method,
    pub subject_ids: Vec<String>,
    pub grid: Vec<f64>,
    /// Link-scale mean function; absent for NARFD.
    pub mean: Option<Array1<f64>>,
    /// K x T component (or prototype) values.
    pub components: Array2<f64>,
    /// N x K subject scores.
    pub scores: Array2<f64>,
    /// Descending covariance eigenvalues; absent for NARFD.
    pub eigenvalues: Option<Vec<f64>>,
    /// GFPCA measurement-noise variance on the log scale.
    pub noise_var: Option<f64>,
    /// N x T fitted values on the observation scale (not serialized).
    pub fitted: Array2<f64>,
    pub converged: bool,
}

impl Decomposition {
    pub fn n_components(&self) -> usize {
        self.components.nrows()
    }

    pub fn n_subjects(&self) -> usize {
        self.scores.nrows()
    }

    /// Fitted values recomputed from mean, components, and scores.
    pub fn reconstruct_fitted(&self) -> Array2<f64> {
        let n = self.n_subjects();
        let t = self.grid.len();
        let mut eta = self.scores.dot(&self.components);
        if let Some(mean) = &self.mean {
            for i in 0..n {
                for j in 0..t {
                    eta[[i, j]] += mean[j];
                }
            }
        }
        match self.method {
            Method::Gfpca => eta.mapv(|v| (v.exp() - 1.0).max(0.0)),
            Method::Pfpca => eta.mapv(f64::exp),
            Method::Narfd => eta,
        }
    }

    pub fn to_json(&self) -> String {
        let mirror = DecompositionJson {
            method: self.method,
            subject_ids: self.subject_ids.clone(),
            grid: self.grid.clone(),
            mean: self.mean.as_ref().map(|m| m.to_vec()),
            components: self.components.rows().into_iter().map(|r| r.to_vec()).collect(),
            scores: self.scores.rows().into_iter().map(|r| r.to_vec()).collect(),
            eigenvalues: self.eigenvalues.clone(),
            noise_var: self.noise_var,
            converged: self.converged,
        };
        serde_json::to_string_pretty(&mirror).expect("decomposition serialization cannot fail")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let mirror: DecompositionJson =
            serde_json::from_str(text).map_err(|e| Error::Json(e.to_string()))?;
        let t = mirror.grid.len();
        let k = mirror.components.len();
        let n = mirror.scores.len();
        if mirror.components.iter().any(|c| c.len() != t) {
            return Err(Error::Json("component length does not match grid".into()));
        }
        if mirror.scores.iter().any(|s| s.len() != k) {
            return Err(Error::Json("score row length does not match component count".into()));
        }
        if mirror.subject_ids.len() != n {
            return Err(Error::Json("subject_ids length does not match scores".into()));
        }
        if let Some(mean) = &mirror.mean {
            if mean.len() != t {
                return Err(Error::Json("mean length does not match grid".into()));
            }
        }
        let components = Array2::from_shape_fn((k, t), |(a, b)| mirror.components[a][b]);
        let scores = Array2::from_shape_fn((n, k), |(a, b)| mirror.scores[a][b]);
        let mut out = Decomposition {
            method: mirror.method,
            subject_ids: mirror.subject_ids,
            grid: mirror.grid,
            mean: mirror.mean.map(Array1::from),
            components,
            scores,
            eigenvalues: mirror.eigenvalues,
            noise_var: mirror.noise_var,
            fitted: Array2::zeros((0, 0)),
            converged: mirror.converged,
        };
        out.fitted = out.reconstruct_fitted();
        Ok(out)
    }
}

#[derive(Serialize, Deserialize)]
struct DecompositionJson {
    method: Method,
    subject_ids: Vec<String>,
    grid: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    mean: Option<Vec<f64>>,
    components: Vec<Vec<f64>>,
    scores: Vec<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    eigenvalues: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    noise_var: Option<f64>,
    #[serde(default = "default_true")]
    converged: bool,
}

fn default_true() -> bool {
    true
}
