//! Crate-wide error type.

use thiserror::Error;

/// Errors produced by construction, assembly, and solving.
#[derive(Debug, Error)]
pub enum Error {
    /// A constructor or configuration value is out of its legal range. The
    /// message names the offending field.
    #[error("invalid {field}: {message}")]
    Invalid {
        /// Name of the offending field or parameter.
        field: &'static str,
        /// Human-readable description of the violation.
        message: String,
    },

    /// An evaluation point lies outside the sub-domain box beyond the
    /// clamping tolerance.
    #[error("point {index} is outside the sub-domain box in dimension {dim}: \
             coordinate {coord} not in [{low}, {high}]")]
    PointOutsideBox {
        /// Index of the offending point in the input list.
        index: usize,
        /// Dimension in which the point escapes the box.
        dim: usize,
        /// Offending coordinate value.
        coord: f64,
        /// Box lower bound in that dimension.
        low: f64,
        /// Box upper bound in that dimension.
        high: f64,
    },

    /// Boundary data required for a domain face is missing.
    #[error("missing boundary data for the {side} face of dimension {dim}")]
    MissingBoundary {
        /// Spatial dimension of the face.
        dim: usize,
        /// "low" or "high".
        side: &'static str,
    },

    /// The SVD (or another dense factorization) failed to converge.
    #[error("linear algebra failure: {0}")]
    Linalg(String),

    /// A residual or Jacobian evaluation produced a non-finite value.
    #[error("non-finite value encountered in {context}")]
    NonFinite {
        /// Which evaluation produced the non-finite value.
        context: String,
    },

    /// A block solve failed during time marching.
    #[error("block {block} failed: {source}")]
    BlockSolve {
        /// Index of the failing time block.
        block: usize,
        /// Underlying failure.
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    /// Shorthand for an invalid-field error.
    pub fn invalid(field: &'static str, message: impl Into<String>) -> Self {
        Error::Invalid { field, message: message.into() }
    }
}
