use thiserror::Error;

/// Error taxonomy shared across the crate.
///
/// The CLI maps these onto exit codes: parse/validation problems exit 2,
/// divergence exits 3, verification failures exit 4.
#[derive(Debug, Error)]
pub enum Error {
    /// A state or intermediate value failed a structural check (non-finite
    /// entries, quaternion far from unit norm, mismatched mode counts).
    #[error("invalid state: {0}")]
    InvalidState(String),

    /// A configuration value or post-construction invariant is out of range.
    #[error("configuration error: {0}")]
    Config(String),

    /// Scenario text could not be parsed; `line` is 1-based.
    #[error("scenario error (line {line}): {msg}")]
    Parse { line: usize, msg: String },

    /// An argument fell outside its documented domain.
    #[error("range error: {0}")]
    Range(String),

    /// The integrator produced a non-finite state.
    #[error("divergence at t = {t} (step {step})")]
    Divergence { t: f64, step: u64 },

    /// A condition that the implementation guarantees cannot occur did occur.
    #[error("internal error: {0}")]
    Internal(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
