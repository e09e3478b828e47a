use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("unknown node '{0}'")]
    UnknownNode(String),

    #[error("node '{id}' declared with two different types ('{first}' and '{second}')")]
    ConflictingType {
        id: String,
        first: String,
        second: String,
    },

    #[error("no neighbor of required type '{ty}' at node '{node}'")]
    NoTypedNeighbor { node: String, ty: String },

    #[error("unknown type name '{0}'")]
    UnknownType(String),

    #[error("meta-path step {from}-{to} is not an edge of the meta-schema")]
    SchemaViolation { from: String, to: String },

    #[error("meta-path must start and end with the same type (got {first}...{last}); append the reversed path to make it symmetric, e.g. '{hint}'")]
    NotCyclic {
        first: String,
        last: String,
        hint: String,
    },

    #[error("meta-path not realizable as a finite-order chain")]
    NoFiniteOrder,

    #[error("unsupported Markov order {0}; only orders 1 and 2 are supported")]
    UnsupportedOrder(usize),

    #[error("invalid meta-graph: {0}")]
    InvalidMetaGraph(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("graph has {nodes} nodes; dense oracle is capped at {cap}")]
    GraphTooLarge { nodes: usize, cap: usize },

    #[error("fixed-point iteration did not converge after {iterations} iterations (residual {residual:e})")]
    NonConvergence {
        iterations: usize,
        residual: f64,
        last: Vec<f64>,
    },

    #[error("pair chain is reducible: context ({0}, {1}) is unreachable")]
    Reducible(String, String),

    #[error("non-finite value during training: {0}")]
    NonFinite(String),

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("dimension mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),

    #[error("degenerate input: {0}")]
    Degenerate(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
