//! Error type shared by every stage of the pipeline.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("non-finite value in {what} at node {index}")]
    NonFinite { what: &'static str, index: usize },

    #[error("fiber collapse requires a > c (got a = {a}, c = {c})")]
    ModelOrientation { a: String, c: String },

    #[error("model regularity: {0}")]
    ModelRegularity(String),

    #[error("positivity lost in {what}: worst value {worst:.3e} at (x_f, x_b) = ({x_f:.4}, {x_b:.4})")]
    Positivity {
        what: String,
        worst: f64,
        x_f: f64,
        x_b: f64,
    },

    #[error("Poisson compatibility violated: defect integral {defect:.3e} exceeds {tolerance:.3e}")]
    Solvability { defect: f64, tolerance: f64 },

    #[error("Newton did not converge after {iterations} iterations (last residual {last_residual:.3e})")]
    NonConvergence {
        iterations: usize,
        last_residual: f64,
        trace: Vec<f64>,
    },

    #[error("contract violation: {0}")]
    ContractViolation(String),

    #[error("reconstructed form is not a pullback: verticality defect {defect:.3e} > {tolerance:.3e}")]
    PullbackStructure { defect: f64, tolerance: f64 },

    #[error("fiber {fiber}: {source}")]
    Fiber {
        fiber: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("config: {0}")]
    Config(String),
}

impl Error {
    pub(crate) fn in_fiber(self, fiber: usize) -> Self {
        Error::Fiber {
            fiber,
            source: Box::new(self),
        }
    }
}
