use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch in {op}: left is {}x{}, right is {}x{}", left.0, left.1, right.0, right.1)]
    Shape {
        op: &'static str,
        left: (usize, usize),
        right: (usize, usize),
    },

    #[error("invalid matrix: {0}")]
    InvalidMatrix(String),

    #[error("domain error in {op}: {message}")]
    Domain { op: &'static str, message: String },

    #[error("feature row {row} is degenerate (L2 norm {norm:e} is below 1e-12)")]
    DegenerateRow { row: usize, norm: f64 },

    #[error("node {node} has degenerate degree {degree:e} (must be at least 1e-8)")]
    DegenerateDegree { node: usize, degree: f64 },

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("training failed at epoch {epoch}: {source}")]
    Training {
        epoch: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("contract violated: {0}")]
    Contract(String),

    #[error("AUC is undefined: evaluation set contains only class {0}")]
    UndefinedAuc(usize),

    #[error("infeasible experiment plan: {0}")]
    InfeasiblePlan(String),

    #[error("{path}: row {row}, column {column}: {message}")]
    Parse {
        path: PathBuf,
        row: usize,
        column: usize,
        message: String,
    },

    #[error("invalid dataset: {0}")]
    Dataset(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("invalid checkpoint: {0}")]
    Checkpoint(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for failures that come out of the numerics rather than from bad
    /// input or configuration.
    pub fn is_numeric(&self) -> bool {
        match self {
            Error::Domain { .. }
            | Error::DegenerateRow { .. }
            | Error::DegenerateDegree { .. }
            | Error::NonFinite(_)
            | Error::Training { .. } => true,
            _ => false,
        }
    }

    /// Process exit code: 1 for validation errors, 2 for numeric failures.
    pub fn exit_code(&self) -> i32 {
        if self.is_numeric() {
            2
        } else {
            1
        }
    }
}
