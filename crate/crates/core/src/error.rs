//! Crate-wide error type.

use thiserror::Error;

/// Errors produced by graph, distribution, fairness, and model operations.
#[derive(Debug, Error)]
pub enum Error {
    /// Adding the edge would create a directed cycle.
    #[error("edge {from} -> {to} would create a directed cycle")]
    Cycle { from: String, to: String },

    /// A node name was not declared in the graph.
    #[error("unknown node `{0}`")]
    UnknownNode(String),

    /// Two nodes that must be adjacent are not.
    #[error("nodes `{a}` and `{b}` are not adjacent")]
    NotAdjacent { a: String, b: String },

    /// The operation is exhaustive and the input exceeds its size bound.
    #[error("input too large: {size} exceeds the bound of {bound}")]
    TooLarge { size: usize, bound: usize },

    /// A variable name was not found in the table or sample set.
    #[error("unknown variable `{0}`")]
    UnknownVariable(String),

    /// Conditioning on an event whose probability is below the floor.
    #[error("conditioning event has probability below {floor}")]
    ZeroProbabilityEvent { floor: f64 },

    /// A named role (sensitive, truth, prediction) is missing.
    #[error("missing role `{0}`")]
    MissingRole(String),

    /// A table, sample set, or model specification violates an invariant.
    #[error("invalid specification: {0}")]
    InvalidSpec(String),

    /// A query uses arguments that violate its preconditions.
    #[error("invalid query: {0}")]
    InvalidQuery(String),

    /// Malformed input text (edge lists, CSV, JSON).
    #[error("parse error: {0}")]
    Parse(String),
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Parse(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Parse(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
