use thiserror::Error;

/// Errors produced by the test, calibration, and I/O routines.
#[derive(Debug, Error)]
pub enum Error {
    /// The caller handed in data that violates a precondition.
    #[error("invalid input: {0}")]
    Input(String),

    /// A CSV or label file could not be parsed.
    #[error("parse error at line {line}: {msg}")]
    Parse { line: u64, msg: String },

    /// A table or null distribution for which the test statistic has no
    /// nondegenerate limit law.
    #[error("degenerate data: {0}")]
    Degenerate(String),

    /// Series or iteration did not reach the requested accuracy.
    #[error("{method} did not converge after {iterations} iterations (error bound {bound:e})")]
    Convergence {
        method: &'static str,
        iterations: usize,
        bound: f64,
    },

    /// Both tail-probability methods failed.
    #[error("tail probability evaluation failed: {0}")]
    Evaluation(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn input<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Input(msg.into()))
}
