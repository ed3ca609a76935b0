mod ablate;
mod analysis;
mod eval;
mod train;

use std::path::Path;

use narlab_algorithms::Task;
use narlab_model::Checkpoint;
use narlab_training::{checkpoint_task, TrainConfig};
use serde_json::Value;

use crate::args::{Cli, Command, ModelFlags};
use crate::error::{CliError, Result};
use crate::output::RunManifest;

pub use train::train_config;

/// Runs one parsed command line and returns the manifest it wrote.
pub fn run(cli: Cli) -> Result<RunManifest> {
    match cli.command {
        Command::Train(a) => train::cmd_train(&a),
        Command::Eval(a) => eval::cmd_eval(&a),
        Command::Record(a) => analysis::cmd_record(&a),
        Command::Analyze(crate::args::AnalyzeCommand::Pca(a)) => analysis::cmd_pca(&a),
        Command::Analyze(crate::args::AnalyzeCommand::Clusters(a)) => analysis::cmd_clusters(&a),
        Command::Directions(a) => analysis::cmd_directions(&a),
        Command::Perturb(a) => analysis::cmd_perturb(&a),
        Command::Attractor(a) => analysis::cmd_attractor(&a),
        Command::Mispredict(a) => analysis::cmd_mispredict(&a),
        Command::Valgen(a) => analysis::cmd_valgen(&a),
        Command::Ablate(a) => ablate::cmd_ablate(&a),
    }
}

pub(crate) fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    Checkpoint::load(path).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

/// Task requested on the command line, else the one stored in the checkpoint.
pub(crate) fn resolve_task(requested: Option<Task>, ckpt: &Checkpoint) -> Task {
    requested.or_else(|| checkpoint_task(ckpt)).unwrap_or(Task::BellmanFord)
}

pub(crate) fn echo<T: serde::Serialize>(value: &T) -> Value {
    serde_json::to_value(value).unwrap_or(Value::Null)
}

pub(crate) fn base_config(flags: &ModelFlags) -> Result<TrainConfig> {
    match &flags.config {
        Some(path) => {
            let text = std::fs::read(path)?;
            serde_json::from_slice(&text).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
        }
        None => Ok(TrainConfig::default()),
    }
}
