use thiserror::Error;

/// Errors raised by the solvers, diagnostics and scenario front end.
#[derive(Debug, Error)]
pub enum Error {
    /// An input violated a documented invariant. `key` names the offending
    /// parameter (config key where applicable).
    #[error("{key}: {message}")]
    Validation { key: String, message: String },

    #[error("no convergence after {iterations} iterations (relative residual {residual:.3e} > tol {tol:.3e})")]
    NonConvergence {
        iterations: usize,
        residual: f64,
        tol: f64,
        history: Vec<f64>,
    },

    #[error("explicit scheme unstable at step {step} (t = {time:.6}): energy grew more than 10x within 100 steps")]
    Instability { step: usize, time: f64 },

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("config parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn validation(key: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Validation {
            key: key.into(),
            message: message.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
