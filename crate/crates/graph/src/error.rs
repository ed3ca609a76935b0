use thiserror::Error;

#[derive(Debug, Error)]
pub enum GraphError {
    #[error("graph needs at least 2 nodes, got {0}")]
    TooFewNodes(usize),
    #[error("invalid generator spec: {0}")]
    InvalidSpec(String),
    #[error("no usable graph after {attempts} attempts (source never had an outgoing edge)")]
    Degenerate { attempts: usize },
    #[error("scale factor must be positive, got {0}")]
    NonPositiveScale(f64),
    #[error("weight {weight} on edge ({u}, {v}) leaves (0, 1)")]
    WeightOutOfRange { u: usize, v: usize, weight: f64 },
    #[error("potential has {got} entries, graph has {expected} nodes")]
    PotentialSize { expected: usize, got: usize },
    #[error("malformed graph: {0}")]
    Malformed(String),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}
