use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum Error {
    /// A parameter failed validation; `field` names the offending input.
    #[error("invalid {field}: {message}")]
    Invalid { field: String, message: String },

    #[error("operands live on different grid geometries")]
    GeometryMismatch,

    #[error("cell coordinate {coord:?} lies outside extent {extent:?}")]
    OutOfBounds {
        coord: Vec<usize>,
        extent: Vec<usize>,
    },

    /// A finite resource (cells, elements, subsets) would exceed its budget.
    #[error("{what} budget exceeded: required {required}, budget {budget}")]
    BudgetExceeded {
        what: &'static str,
        required: u128,
        budget: u128,
    },

    #[error("no basis element passes the selection threshold")]
    EmptyWitnessFamily,

    #[error("internal invariant violated: {0}")]
    Internal(String),
}

impl Error {
    pub fn invalid(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Invalid {
            field: field.into(),
            message: message.into(),
        }
    }
}
