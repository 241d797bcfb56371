//! Error type shared across the crate.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Invalid argument or out-of-range parameter.
    #[error("domain error: {0}")]
    Domain(String),

    /// A stated precondition of an operation does not hold for the inputs.
    #[error("precondition violated: {0}")]
    Precondition(String),

    /// The assembled linear system is singular (zero pivot or breakdown).
    #[error("singular system: {0}")]
    Singular(String),

    /// An iterative or nonlinear solve failed to reach its tolerance.
    #[error("no convergence after {iterations} iterations (residual {residual:.3e})")]
    NonConvergence { iterations: usize, residual: f64 },

    /// Invalid experiment configuration (caught before any solve).
    #[error("config error: {0}")]
    Config(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub fn precondition(msg: impl Into<String>) -> Self {
        Error::Precondition(msg.into())
    }

    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }
}
