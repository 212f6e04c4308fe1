use thiserror::Error;

/// Errors produced by the computational modules and the command-line front end.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// An argument lies outside the domain of the formula being evaluated.
    #[error("domain error: {0}")]
    Domain(String),

    /// A parameter violates the invariants of its type.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// The result of a computation is not representable as a finite `f64`.
    #[error("overflow: {0}")]
    Overflow(String),

    /// The requested mean energy cannot be reached by any normalized ensemble.
    #[error("target energy {target} is outside the attainable range ({min}, {max})")]
    Infeasible { target: f64, min: f64, max: f64 },

    /// The solver exhausted its iteration budget.
    #[error("solver did not converge after {iterations} iterations (residual {residual:e})")]
    Divergence { iterations: usize, residual: f64 },

    /// Unknown names or inconsistent run options.
    #[error("configuration error: {0}")]
    Config(String),

    /// Malformed input documents.
    #[error("parse error: {0}")]
    Parse(String),

    #[error("i/o error: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Stable machine-readable identifier used in error reports.
    pub fn code(&self) -> &'static str {
        match self {
            Error::Domain(_) => "domain_error",
            Error::InvalidParameter(_) => "invalid_parameter",
            Error::Overflow(_) => "overflow",
            Error::Infeasible { .. } => "infeasible_target_energy",
            Error::Divergence { .. } => "solver_divergence",
            Error::Config(_) => "config_error",
            Error::Parse(_) => "parse_error",
            Error::Io(_) => "io_error",
        }
    }

    /// Process exit status: 1 for computational failures, 2 for input errors.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Overflow(_) | Error::Infeasible { .. } | Error::Divergence { .. } => 1,
            Error::Domain(_)
            | Error::InvalidParameter(_)
            | Error::Config(_)
            | Error::Parse(_)
            | Error::Io(_) => 2,
        }
    }
}
