use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Errors raised anywhere in the toolkit.
///
/// The variants are grouped so that front ends can map them onto exit
/// codes: expression/config problems, model assumption violations, and
/// numerical failures.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("syntax error at byte {offset}: {message}")]
    Syntax { offset: usize, message: String },

    #[error("unknown identifier `{name}` at byte {offset}")]
    UnknownIdentifier { offset: usize, name: String },

    #[error("function `{name}` takes 1 argument but {got} were supplied (byte {offset})")]
    Arity {
        offset: usize,
        name: String,
        got: usize,
    },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("assumption {condition} violated at sigma = {point}: {detail}")]
    Assumption {
        condition: &'static str,
        point: f64,
        detail: String,
    },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("{what} did not converge after {iterations} iterations (last residual {residual:.3e})")]
    NoConvergence {
        what: &'static str,
        iterations: usize,
        residual: f64,
    },

    #[error("numerical failure: {0}")]
    Numerical(String),
}

impl Error {
    pub fn numerical(msg: impl Into<String>) -> Self {
        Error::Numerical(msg.into())
    }

    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    /// True for errors caused by the user's model or expressions rather
    /// than by a solver.
    pub fn is_model_error(&self) -> bool {
        matches!(
            self,
            Error::Syntax { .. }
                | Error::UnknownIdentifier { .. }
                | Error::Arity { .. }
                | Error::Assumption { .. }
        )
    }
}
