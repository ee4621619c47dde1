use thiserror::Error;

use crate::network::ValidationReport;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid network: {0}")]
    InvalidNetwork(ValidationReport),

    #[error("line {line}, column {column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("line {line}: {message}")]
    Semantic { line: usize, message: String },

    #[error("evidence: {0}")]
    Evidence(String),

    #[error("{what} has {count} states, above the cap of {cap}")]
    CapExceeded {
        what: &'static str,
        count: u128,
        cap: u64,
    },

    #[error("evidence has probability zero")]
    ImpossibleEvidence,

    #[error("no free nodes: every node is clamped by evidence")]
    NoFreeNodes,

    /// Every candidate value of `node` has zero weight under its Markov blanket.
    #[error("node '{node}' has no admissible value given its Markov blanket")]
    DeterministicConflict { node: String },

    #[error("{name} = {value} is outside its domain {domain}")]
    Domain {
        name: &'static str,
        value: f64,
        domain: &'static str,
    },

    #[error("bound overflow: {0}")]
    BoundOverflow(String),

    #[error(
        "network contains deterministic (0 or 1) CPT entries; \
         the a-priori bounds require strictly positive probabilities"
    )]
    NonPositiveNetwork,

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("{0}")]
    Usage(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}
