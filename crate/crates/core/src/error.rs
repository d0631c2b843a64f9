use crate::trace::WalkTrace;

/// Errors shared by all solver and I/O modules.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// Malformed or inconsistent input data.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// An instance fails the hypothesis its algorithm requires.
    #[error("infeasible instance: {0}")]
    Infeasible(String),

    /// A subspace with no unit vector was handed to a step chooser.
    #[error("subspace is zero-dimensional, no unit vector exists")]
    SubspaceExhausted,

    /// A walk ran out of admissible directions; carries the partial trace
    /// for post-mortem inspection.
    #[error("walk stuck at iteration {iteration}: empty update subspace")]
    Stuck { iteration: usize, trace: Box<WalkTrace> },

    /// A runtime assertion caught a miscalibrated parameter set.
    #[error("parameter failure at iteration {iteration}: {message}")]
    ParameterFailure { iteration: usize, message: String },

    /// An internal invariant of the walk was violated.
    #[error("invariant violation: {0}")]
    Invariant(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    /// Malformed serialized data, with position information when available.
    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;
