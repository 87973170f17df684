use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("invalid argument: {0}")]
    InvalidArg(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    /// PCG ran out of iterations; carries the best direction found so far.
    #[error("no convergence after {iterations} iterations (residual {residual:.3e})")]
    NonConvergence {
        iterations: usize,
        residual: f64,
        best: Vec<f64>,
    },

    #[error("stage at n = {n} exceeded the inner-iteration budget")]
    StageFailure {
        n: usize,
        report: Box<crate::solver::StageReport>,
    },

    #[error("transport failure: {0}")]
    Transport(String),

    #[error("capability exceeded: {0}")]
    Capability(String),

    #[error("config error in `{field}`: {msg}")]
    Config { field: String, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
