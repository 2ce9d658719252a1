use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid tensor order {0}: expected one of 2, 4, 6")]
    InvalidOrder(usize),

    #[error("incompatible tensors: order {left} vs order {right}")]
    IncompatibleTensors { left: usize, right: usize },

    #[error("direction is not a unit vector (norm {norm})")]
    NotUnitVector { norm: f64 },

    #[error("mode {mode} out of range for a tensor of order {order}")]
    ModeOutOfRange { mode: usize, order: usize },

    #[error("tensor is not symmetric: deviation {deviation:e} exceeds tolerance")]
    Asymmetric { deviation: f64 },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("matrix is not positive definite: pivot {pivot} has value {value:e}")]
    NotPositiveDefinite { pivot: usize, value: f64 },

    #[error("site count mismatch: expected {expected}, found {found}")]
    SiteCountMismatch { expected: usize, found: usize },

    #[error("query point ({x}, {y}) lies outside the grid domain")]
    OutOfDomain { x: f64, y: f64 },

    #[error("operation requires order {required}, field has order {found}")]
    UnsupportedOrder { required: usize, found: usize },

    #[error("rank-deficient design matrix: {0}")]
    RankDeficient(String),

    #[error("non-positive signal {value} at site {site}, direction {direction}")]
    NonPositiveSignal {
        site: usize,
        direction: usize,
        value: f64,
    },

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("no posterior samples available")]
    EmptySamples,

    #[error("site ({x}, {y}) has no match in the reference field")]
    SiteMismatch { x: f64, y: f64 },

    #[error("{path}:{line}: {msg}")]
    Parse {
        path: PathBuf,
        line: usize,
        msg: String,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    /// Numerical failures map to exit code 2 in the CLI; everything else is a
    /// usage or input problem.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::NotPositiveDefinite { .. }
                | Error::RankDeficient(_)
                | Error::NonFinite(_)
                | Error::Asymmetric { .. }
                | Error::NonPositiveSignal { .. }
        )
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(path: impl Into<PathBuf>, line: usize, msg: impl Into<String>) -> Self {
        Error::Parse {
            path: path.into(),
            line,
            msg: msg.into(),
        }
    }
}
