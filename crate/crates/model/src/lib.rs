//! Encode-process-decode graph network trained to imitate an algorithm one
//! step at a time.
//!
//! Each step encodes the current hints (source flag, reached flag, distance,
//! predecessor pointer) together with the previous latent, runs one round of
//! message passing, optionally decays the latent, and decodes predecessor
//! pointers and distances.

mod checkpoint;
mod config;
pub mod handset;
mod inputs;
mod model;
mod params;

use thiserror::Error;

pub use checkpoint::{Checkpoint, CHECKPOINT_MAGIC, CHECKPOINT_VERSION};
pub use config::{Aggregator, DecayMode, ModelConfig, Processor};
pub use inputs::{GraphInputs, DIST_CLIP, EDGE_FEATURES, NODE_FEATURES};
pub use model::{apply_decay, DecayState, Decoded, Feed, Model, Rollout};
pub use params::{Linear, ParamStore};

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("invalid model configuration: {0}")]
    Config(String),
    #[error("invalid input: {0}")]
    Input(String),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error("non-finite value in {0}")]
    NonFinite(String),
    #[error("io: {0}")]
    Io(String),
    #[error(transparent)]
    Tensor(#[from] narlab_tensor::TensorError),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, ModelError>;
