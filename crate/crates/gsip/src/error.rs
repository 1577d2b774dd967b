use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("invalid image: {0}")]
    InvalidImage(String),

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("invalid graph: {0}")]
    InvalidGraph(String),

    #[error("node {node} has zero degree; normalized operators are undefined")]
    DegenerateDegree { node: usize },

    #[error("row {row} sums to zero; matrix cannot be scaled to doubly stochastic")]
    NotScalable { row: usize },

    #[error(
        "operator dimension {size} exceeds the dense eigensolver limit {limit}; \
         use polynomial or Chebyshev filtering for large graphs"
    )]
    SizeLimit { size: usize, limit: usize },

    #[error("operator is not symmetric; eigendecomposition requires a symmetric operator")]
    NotSymmetric,

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("{what} did not converge after {iterations} iterations (residual {residual:.3e})")]
    Convergence {
        what: &'static str,
        iterations: usize,
        residual: f64,
    },

    #[error("decode error at byte {offset}: {reason}")]
    Decode { offset: usize, reason: String },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }

    pub(crate) fn decode(offset: usize, reason: impl Into<String>) -> Self {
        Error::Decode {
            offset,
            reason: reason.into(),
        }
    }
}
