use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid coefficients: {0}")]
    InvalidCoefficients(String),

    #[error("invalid data: {0}")]
    InvalidData(String),

    #[error("solver failure in {context}: last residual {residual:e}")]
    SolverFailure { context: String, residual: f64 },

    #[error("oracle not applicable: {0}")]
    OracleInapplicable(String),

    #[error("internal error: {0}")]
    Internal(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn solver(context: impl Into<String>, residual: f64) -> Self {
        Error::SolverFailure {
            context: context.into(),
            residual,
        }
    }
}
