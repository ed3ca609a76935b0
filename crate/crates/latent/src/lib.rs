//! Analyses of the latent space of a trained reasoner: trajectory recording,
//! PCA views, reweighting-cluster directions, perturbations, attractor
//! diagnostics, mispredict structure and value generalisation.

macro_rules! named_enum {
    ($name:ident, $what:literal, [$($variant:ident => $text:literal),+ $(,)?]) => {
        #[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
        #[serde(rename_all = "snake_case")]
        pub enum $name {
            $($variant),+
        }

        impl $name {
            pub const ALL: &'static [$name] = &[$($name::$variant),+];

            pub fn name(self) -> &'static str {
                match self {
                    $($name::$variant => $text),+
                }
            }
        }

        impl std::fmt::Display for $name {
            fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
                f.write_str(self.name())
            }
        }

        impl std::str::FromStr for $name {
            type Err = $crate::LatentError;

            fn from_str(s: &str) -> $crate::Result<Self> {
                let s = s.replace('-', "_");
                Self::ALL.iter().copied().find(|m| m.name() == s)
                    .ok_or_else(|| $crate::LatentError::Unknown { what: $what, name: s })
            }
        }
    };
}

mod aggregate;
mod analysis;
mod directions;
mod pca;
mod perturb;
mod trajectory;

use thiserror::Error;

pub use aggregate::{node_aggregate, per_step_pca, step_wise, trajectory_wise, Aggregated, NodeAgg, StepPoint};
pub use analysis::{
    attractor_stats, default_variants, mispredict_report, value_generalisation_report, MispredictReport, NodeOutcome,
    ValGenRow,
};
pub use directions::{
    build_direction_db, cluster_projection, find_clusters, ClusterKind, ClusterPoint, ClusterProjection, ClusterSpec,
    DirectionDatabase, DirectionEntry,
};
pub use pca::{pca, PcaResult};
pub use perturb::{perturb_eval, PerturbMode, PerturbReport, Selector};
pub use trajectory::{filter_graphs, record_graphs, record_trajectories, TrajectoryTensor, TRAJECTORY_MAGIC};

#[derive(Debug, Error)]
pub enum LatentError {
    #[error("shape error: {0}")]
    Shape(String),
    #[error("{0}")]
    NonFinite(String),
    #[error("bad trajectory file: {0}")]
    Format(String),
    #[error("pca: {0}")]
    Pca(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("unknown {what} '{name}'")]
    Unknown { what: &'static str, name: String },
    #[error("found {found} of {wanted} graphs terminating at T={t} within {budget} draws")]
    NotEnoughGraphs { wanted: usize, found: usize, t: usize, budget: usize },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Graph(#[from] narlab_graph::GraphError),
    #[error(transparent)]
    Algo(#[from] narlab_algorithms::AlgoError),
    #[error(transparent)]
    Model(#[from] narlab_model::ModelError),
    #[error(transparent)]
    Train(#[from] narlab_training::TrainError),
}

pub type Result<T> = std::result::Result<T, LatentError>;
