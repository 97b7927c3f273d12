//! Decompositions of count-valued functional data — Gaussian FPCA on
//! log-transformed curves, Poisson FPCA with a log link, and nonnegative
//! regularized function decomposition (NARFD) — together with the
//! accelerometry preprocessing that feeds them and survey-weighted
//! mortality-prediction models evaluated by weighted ROC/AUC.

pub mod basis;
pub mod decomposition;
pub mod error;
pub mod fiteval;
pub mod gfpca;
pub mod ingest;
pub mod pfpca;
pub mod predict;
pub mod linalg;
pub mod metrics;
pub mod narfd;
pub mod quad;
pub mod rng;
pub mod simulate;
pub mod smooth;

pub use decomposition::{Decomposition, Method};
pub use error::{Error, Result};
