use thiserror::Error;

use crate::sim::Tick;
use crate::topology::VertexId;

#[derive(Debug, Error)]
pub enum Error {
    /// A line of a network, scenario, region or CSV file failed to parse.
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    /// A scheme, wrapper or injector spec string was malformed.
    #[error("bad spec `{0}`: {1}")]
    Spec(String, String),

    /// The network violates a structural precondition (unbalanced degrees,
    /// disconnected, unknown edge, ...).
    #[error("invalid network: {0}")]
    InvalidNetwork(String),

    /// Distance or diameter was requested across an unreachable pair.
    #[error("vertex {to} is unreachable from {from}")]
    Unreachable { from: VertexId, to: VertexId },

    /// The engine hit a state that the model forbids (more residents than
    /// output edges, a scheme assigning an occupied edge, ...).
    #[error("simulation invariant breached: {0}")]
    Sim(String),

    /// An injection request named an invalid source/destination pair.
    #[error("invalid injection request: {0}")]
    Injection(String),

    /// Analytic flush estimation was asked of a scheme with no certified bound.
    #[error("no analytic flush bound for scheme `{0}`")]
    NoAnalyticBound(String),

    /// A measured flush trial failed to empty the network within its budget.
    #[error("configuration not flushed within budget {budget} (trial {trial})")]
    NotFlushed { trial: usize, budget: Tick },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
