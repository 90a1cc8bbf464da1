use thiserror::Error;

/// Failures shared by every numerical routine in the crate.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("pole: {0}")]
    Pole(String),

    /// A series ran out of its term budget before meeting the tolerance.
    #[error("series truncated after {terms} terms (last term magnitude {last_term:e})")]
    Truncation { terms: usize, last_term: f64 },

    /// A quadrature exhausted its refinement levels.
    #[error("quadrature did not converge: estimate {estimate:e}, error {error:e}")]
    Unconverged { estimate: f64, error: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

pub type Result<T> = std::result::Result<T, Error>;
