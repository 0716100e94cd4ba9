//! Error type shared across the crate.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// A precondition on a numeric argument was violated.
    #[error("domain error: {0}")]
    Domain(String),

    /// An interval operation was applied outside its domain
    /// (division by an interval containing zero, log of a non-positive
    /// interval, sqrt of a negative interval, ...).
    #[error("interval error: {0}")]
    Interval(String),

    /// An adaptive quadrature failed to reach the requested tolerance.
    /// Carries the last two iterates so callers can judge how far off it was.
    #[error("quadrature did not converge: last iterates {prev} and {last} (tol {tol})")]
    NoConvergence { prev: f64, last: f64, tol: f64 },

    /// An interval scan could not separate a margin from zero at the
    /// maximum subdivision depth.
    #[error("scan inconclusive: {0}")]
    Inconclusive(String),

    /// Integer overflow while building a function (e.g. lacunary exponents).
    #[error("overflow: {0}")]
    Overflow(String),

    #[error("parse error at byte {position}: {message}")]
    Parse { position: usize, message: String },

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("serialization error: {0}")]
    Serde(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }
    pub fn interval(msg: impl Into<String>) -> Self {
        Error::Interval(msg.into())
    }
}
