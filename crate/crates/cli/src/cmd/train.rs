use narlab_model::Aggregator;
use narlab_training::{train_run, MetricsRow, TrainConfig};

use super::{base_config, echo};
use crate::args::{ModelFlags, TrainArgs};
use crate::error::{CliError, Result};
use crate::output::{OutputDir, RunManifest};

/// Merges `--config` (or defaults) with explicit flags.
pub fn train_config(flags: &ModelFlags) -> Result<TrainConfig> {
    let mut cfg = base_config(flags)?;
    let m = &mut cfg.model;
    if let Some(v) = flags.processor {
        m.processor = v;
    }
    if let Some(v) = flags.aggregator {
        m.aggregator = v;
    }
    if let Some(t) = flags.temp {
        if m.aggregator != Aggregator::Softmax {
            return Err(CliError::Usage(format!("--temp requires --agg softmax (aggregator is {})", m.aggregator)));
        }
        m.softmax_temperature = t;
    }
    if let Some(v) = flags.decay {
        m.decay_factor = v;
    }
    if let Some(v) = flags.decay_mode {
        m.decay_mode = v;
    }
    if let Some(v) = flags.latent_dim {
        m.latent_dim = v;
    }
    if let Some(v) = flags.hidden {
        m.message_hidden = v;
    }
    if let Some(v) = flags.task {
        cfg.task = v;
    }
    if let Some(n) = flags.train_n {
        cfg.train.n = n;
        cfg.eval.n = 4 * n;
    }
    if let Some(n) = flags.eval_n {
        cfg.eval.n = n;
    }
    if let Some(p) = flags.p {
        cfg.train.p = p;
        cfg.eval.p = p;
    }
    if let Some(v) = flags.steps {
        cfg.steps = v;
    }
    if let Some(v) = flags.batch {
        cfg.batch_size = v;
    }
    if let Some(v) = flags.lr {
        cfg.lr = v;
    }
    if let Some(v) = flags.own_hint_prob {
        cfg.own_hint_prob = v;
    }
    if let Some(s) = flags.seed {
        cfg.seeds = vec![s];
    }
    if let Some(s) = &flags.seeds {
        cfg.seeds = s.clone();
    }
    if let Some(v) = flags.log_every {
        cfg.log_every = v;
    }
    if let Some(v) = flags.eval_every {
        cfg.eval_every = v;
    }
    if let Some(v) = flags.eval_samples {
        cfg.eval_samples = v;
    }
    cfg.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    Ok(cfg)
}

pub fn checkpoint_name(seed: u64) -> String {
    format!("ckpt_seed{seed}.bin")
}

pub(super) fn cmd_train(args: &TrainArgs) -> Result<RunManifest> {
    let cfg = train_config(&args.model)?;
    let mut out = OutputDir::create(&args.out)?;
    let mut rows: Vec<MetricsRow> = Vec::new();
    for &seed in &cfg.seeds {
        let outcome = train_run(&cfg, seed, &mut |r| rows.push(r.clone()))?;
        log::info!("seed {seed}: {} steps in {:.1}s, final loss {:.4}", cfg.steps, outcome.seconds, outcome.final_loss);
        out.write(&checkpoint_name(seed), &outcome.checkpoint.to_bytes())?;
    }
    out.write_csv("metrics.csv", &rows)?;
    out.finish("train", echo(&cfg), cfg.seeds.clone())
}
