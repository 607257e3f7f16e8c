use thiserror::Error;

/// Errors produced by the analysis, simulation, optimization and learning code.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// An argument lies outside the mathematical domain of a function.
    #[error("{func}: argument out of domain ({detail})")]
    Domain { func: &'static str, detail: String },

    /// The parameters are valid but outside the region the evaluation route supports.
    #[error("{func}: unsupported parameter region ({detail})")]
    Unsupported { func: &'static str, detail: String },

    /// A degenerate input, e.g. a zero channel vector or an empty slot class.
    #[error("degenerate input: {0}")]
    Degenerate(String),

    /// A precondition of the caller was violated (shapes, divisibility, ...).
    #[error("contract violation: {0}")]
    Contract(String),

    /// The configuration admits no feasible solution.
    #[error("infeasible configuration: {0}")]
    Infeasible(String),

    /// A configuration value failed validation.
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    /// Numerical failure (non-convergence, NaN, overflow).
    #[error("numerical failure: {0}")]
    Numerical(String),

    /// I/O or format failure while reading or writing an artifact.
    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain(func: &'static str, detail: impl Into<String>) -> Error {
    Error::Domain {
        func,
        detail: detail.into(),
    }
}
