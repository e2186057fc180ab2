use thiserror::Error;

use crate::constraints::FeasibilityReport;
use crate::construct::BudgetExceeded;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid schema: {0}")]
    Schema(String),

    #[error("constraint system is infeasible ({} witness credential(s))", .0.witnesses.len())]
    Infeasible(Box<FeasibilityReport>),

    #[error("row budget of {} exhausted with {} credential(s) still short", .0.max_rows, .0.remaining.len())]
    BudgetExceeded(Box<BudgetExceeded>),

    #[error("{path}:{line}:{column}: {message}")]
    Parse {
        path: String,
        line: u64,
        column: u64,
        message: String,
    },

    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }
}
