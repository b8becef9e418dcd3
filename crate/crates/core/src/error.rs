use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("validation failed: {0}")]
    Validation(String),

    #[error("parse error in field `{field}`: {message}")]
    Parse { field: String, message: String },

    /// An exact computation would exceed its configured size limit. The
    /// caller has to pick an approximate route (Monte Carlo, dynamics)
    /// explicitly.
    #[error("capacity exceeded: {what} needs {needed}, limit is {limit}; {hint}")]
    Capacity {
        what: &'static str,
        needed: u64,
        limit: u64,
        hint: &'static str,
    },

    #[error("infeasible: {0}")]
    Infeasible(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("solver failure: {0}")]
    Solver(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub(crate) fn validation(msg: impl Into<String>) -> Self {
        Error::Validation(msg.into())
    }

    pub fn is_capacity(&self) -> bool {
        matches!(self, Error::Capacity { .. })
    }
}
