//! Crate-wide error type.

use thiserror::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

/// Everything that can go wrong across the library.
///
/// Variants are grouped by origin: caller mistakes (`InvalidInput`),
/// numerical breakdown (`StepLimit`, `Diverged`, `QuadratureFailed`,
/// `LineSearchFailed`), dense-output misuse (`OutOfSpan`), and I/O.
#[derive(Debug, Error)]
pub enum Error {
    /// A caller-supplied argument or configuration value is unusable.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// The step controller hit its step budget before reaching the end time.
    #[error("step limit exceeded: {0}")]
    StepLimit(String),

    /// The solution or an error estimate stopped being finite.
    #[error("integration diverged: {0}")]
    Diverged(String),

    /// A dense-output query fell outside the stored span.
    #[error("time {t} outside trajectory span [{lo}, {hi}]")]
    OutOfSpan { t: f64, lo: f64, hi: f64 },

    /// Adaptive quadrature could not meet its tolerance within its depth budget.
    #[error("quadrature did not converge: {0}")]
    QuadratureFailed(String),

    /// Backtracking line search ran out of step halvings.
    #[error("line search failed: {0}")]
    LineSearchFailed(String),

    /// Filesystem-level failure while reading or writing experiment files.
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    /// Malformed JSON in a config or data file.
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Shorthand used throughout the crate for validation failures.
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }
}
