//! Graph inputs for the Bellman-Ford reasoner.
//!
//! Graphs are dense directed adjacency matrices with weights in `(0, 1)`;
//! an exact `0.0` marks a missing edge. Random graphs are Erdős-Rényi with
//! symmetric weights, and [`symmetry`] holds the two weight transforms
//! (scaling and potential reweighting) that leave the algorithm's pointer
//! trace unchanged.

mod error;
mod generate;
mod graph;
pub mod seed;
pub mod symmetry;

pub use error::GraphError;
pub use generate::{generate_er, GeneratorSpec, MAX_GENERATION_ATTEMPTS};
pub use graph::WeightedGraph;
pub use symmetry::{make_reweighting_cluster, reweight, scale_weights, NodePotential};

pub type Result<T> = std::result::Result<T, GraphError>;
