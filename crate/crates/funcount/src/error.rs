use thiserror::Error;

/// Crate-wide error type.
#[derive(Error, Debug)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("{path}: {msg}")]
    Csv { path: String, msg: String },

    #[error("duplicate subject id '{0}'")]
    DuplicateSubject(String),

    #[error("unknown level '{value}' for categorical variable '{variable}'")]
    UnknownLevel { variable: String, value: String },

    #[error("design matrix is rank deficient; aliased columns: {}", .0.join(", "))]
    RankDeficient(Vec<String>),

    #[error("{context} did not converge after {iterations} iterations")]
    NonConvergence {
        context: String,
        iterations: usize,
        /// Last iterate, so callers can inspect or salvage the solve.
        last: Vec<f64>,
    },

    #[error("per-subject Poisson fits diverged for {} of {total} subjects: {}", .subjects.len(), .subjects.join(", "))]
    SubjectDivergence { subjects: Vec<String>, total: usize },

    #[error("{0}")]
    SingleClass(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("{0}")]
    Json(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub fn dim(msg: impl Into<String>) -> Self {
        Error::DimensionMismatch(msg.into())
    }
}
