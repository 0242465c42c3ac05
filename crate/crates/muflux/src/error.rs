//! Error types shared across the crate.

pub type Result<T> = std::result::Result<T, Error>;

/// Failure categories. The CLI maps these onto distinct exit codes, so new
/// variants should extend the list rather than overload an existing one.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    /// An argument violates a precondition (non-positive dimension, angle out
    /// of range, zero live time, ...).
    #[error("domain error: {0}")]
    Domain(String),

    /// A configuration is structurally invalid (missing surface reference,
    /// contradictory settings, ...).
    #[error("config error: {0}")]
    Config(String),

    /// Input data cannot be used as provided (unsorted records, degenerate
    /// fit inputs, ...).
    #[error("data error: {0}")]
    Data(String),

    /// A log stream does not conform to the file format.
    #[error("format error: {0}")]
    Format(String),

    /// Quadrature failed to reach the requested tolerance. Carries the best
    /// estimate so callers can decide whether to use it anyway.
    #[error("quadrature did not converge: best estimate {best_cpm} cpm, error estimate {error_estimate_cpm} cpm after {refinements} refinements")]
    Convergence {
        best_cpm: f64,
        error_estimate_cpm: f64,
        refinements: u32,
    },

    /// The least-squares problem is degenerate.
    #[error("fit error: {0}")]
    Fit(String),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }
}
