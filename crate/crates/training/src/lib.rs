//! Dataset sampling, the teacher-forced training loop and the evaluation
//! protocol (self-rollout for the oracle number of steps, pointer accuracy
//! over all nodes).

mod config;
mod data;
mod eval;
mod stats;
mod train;

use thiserror::Error;

pub use config::TrainConfig;
pub use data::{sample_graph, sample_graphs, GraphStream};
pub use eval::{
    accuracy_vs_steps, checkpoint_task, combine_reports, evaluate, evaluate_graphs, forced_steps_eval, BinRate, EvalReport, Executor,
    OracleExecutor, StepsRow, DISTANCE_BIN,
};
pub use stats::{mean_std, pearson};
pub use train::{train, train_run, MetricsRow, TrainOutcome};

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("invalid training configuration: {0}")]
    Config(String),
    #[error("training diverged at step {step}: {what}")]
    Diverged { step: usize, what: String },
    #[error("task mismatch: checkpoint trained on {trained}, evaluation asks for {requested}")]
    TaskMismatch { trained: String, requested: String },
    #[error(transparent)]
    Graph(#[from] narlab_graph::GraphError),
    #[error(transparent)]
    Algo(#[from] narlab_algorithms::AlgoError),
    #[error(transparent)]
    Model(#[from] narlab_model::ModelError),
    #[error(transparent)]
    Tensor(#[from] narlab_tensor::TensorError),
}

pub type Result<T> = std::result::Result<T, TrainError>;
