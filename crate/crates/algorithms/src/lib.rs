//! Ground-truth algorithm executors that emit per-step hint traces.
//!
//! A trace is the sequence of `(pi, dist)` snapshots the algorithm passes
//! through: snapshot 0 is the initial state and the last snapshot is the
//! fixed point. Predecessor pointers of the source and of unreached nodes
//! point at the node itself; unreached distances are `f64::INFINITY`.

mod agreement;
mod bellman_ford;
mod bfs;
mod trace;
mod variants;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use agreement::{agreement, AgreementMode};
pub use bellman_ford::{bellman_ford_trace, relax_step, TIE_EPS};
pub use bfs::bfs_trace;
pub use trace::{ExecutionTrace, Snapshot};
pub use variants::{variant_trace, VariantKind, VariantSpec};

use narlab_graph::WeightedGraph;

#[derive(Debug, Error)]
pub enum AlgoError {
    #[error("unknown {what} `{name}`")]
    Unknown { what: &'static str, name: String },
    #[error("invalid variant parameters: {0}")]
    InvalidVariant(String),
    #[error("trace size mismatch: {0} vs {1} nodes")]
    SizeMismatch(usize, usize),
    #[error("malformed trace: {0}")]
    Malformed(String),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, AlgoError>;

/// Algorithms the reasoner can be trained on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    BellmanFord,
    Bfs,
}

impl Task {
    pub fn trace(self, g: &WeightedGraph) -> ExecutionTrace {
        match self {
            Task::BellmanFord => bellman_ford_trace(g),
            Task::Bfs => bfs_trace(g),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Task::BellmanFord => "bellman_ford",
            Task::Bfs => "bfs",
        }
    }
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Task {
    type Err = AlgoError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "bellman_ford" | "bellman-ford" => Ok(Task::BellmanFord),
            "bfs" => Ok(Task::Bfs),
            _ => Err(AlgoError::Unknown { what: "task", name: s.to_string() }),
        }
    }
}
