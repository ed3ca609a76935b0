use narlab_algorithms::Task;
use narlab_graph::GeneratorSpec;
use narlab_model::ModelConfig;
use narlab_tensor::AdamConfig;
use serde::{Deserialize, Serialize};

use crate::{Result, TrainError};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub task: Task,
    pub model: ModelConfig,
    /// Training graphs; the seed field is replaced by per-item seeds.
    pub train: GeneratorSpec,
    /// Graphs for the periodic evaluation column of the metrics.
    pub eval: GeneratorSpec,
    pub batch_size: usize,
    pub steps: usize,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub clip_norm: Option<f64>,
    /// Probability that a training step after the first is fed the model's own
    /// previous prediction instead of the ground-truth hints.
    pub own_hint_prob: f64,
    /// One independent run per seed.
    pub seeds: Vec<u64>,
    /// Cycle through this many distinct training graphs instead of fresh ones.
    pub train_pool: Option<usize>,
    /// Metrics row interval; 0 disables periodic rows.
    pub log_every: usize,
    /// Evaluation interval; 0 disables periodic evaluation.
    pub eval_every: usize,
    pub eval_samples: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            task: Task::BellmanFord,
            model: ModelConfig::default(),
            train: GeneratorSpec::new(16, 0.5, 0),
            eval: GeneratorSpec::new(64, 0.5, 0),
            batch_size: 32,
            steps: 5000,
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            clip_norm: None,
            own_hint_prob: 0.5,
            seeds: vec![0],
            train_pool: None,
            log_every: 100,
            eval_every: 0,
            eval_samples: 32,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        self.train.validate()?;
        self.eval.validate()?;
        if self.batch_size == 0 {
            return Err(TrainError::Config("batch size must be positive".into()));
        }
        if !(self.lr > 0.0) {
            return Err(TrainError::Config(format!("learning rate must be positive, got {}", self.lr)));
        }
        if !(0.0..=1.0).contains(&self.own_hint_prob) {
            return Err(TrainError::Config(format!("own_hint_prob {} outside [0, 1]", self.own_hint_prob)));
        }
        if self.seeds.is_empty() {
            return Err(TrainError::Config("at least one seed is required".into()));
        }
        if self.train_pool == Some(0) {
            return Err(TrainError::Config("training pool must hold at least one graph".into()));
        }
        Ok(())
    }

    pub fn adam(&self) -> AdamConfig {
        AdamConfig { lr: self.lr, beta1: self.beta1, beta2: self.beta2, eps: self.eps, clip_norm: self.clip_norm }
    }
}
