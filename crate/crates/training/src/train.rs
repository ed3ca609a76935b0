use std::time::Instant;

use narlab_graph::seed::{item_seed, rng_from, stream_seed, DATAGEN, INIT};
use narlab_graph::WeightedGraph;
use narlab_model::{Checkpoint, Model};
use narlab_tensor::{Adam, Tape, Tensor};
use rand::Rng;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::data::{sample_graph, sample_graphs};
use crate::eval::evaluate_graphs;
use crate::{Result, TrainConfig, TrainError};

/// One line of the training metrics table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub run_seed: u64,
    pub step: usize,
    /// Mean batch loss since the previous row.
    pub train_loss: f64,
    pub eval_acc: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub checkpoint: Checkpoint,
    pub metrics: Vec<MetricsRow>,
    pub final_loss: f64,
    pub seconds: f64,
}

/// Loss and parameter gradients of one graph.
fn graph_grads(model: &Model<f32>, g: &WeightedGraph, cfg: &TrainConfig, feed_seed: u64) -> Result<(f64, Vec<Tensor<f32>>)> {
    let trace = cfg.task.trace(g);
    let mut tape = Tape::new();
    let pv = model.params().register(&mut tape, true);
    let mut rng = rng_from(feed_seed);
    let p = cfg.own_hint_prob;
    let loss = model.loss_with(&mut tape, &pv, g, &trace, &mut |_| p > 0.0 && rng.random_bool(p))?;
    let value = tape.value(loss).item() as f64;
    let mut grads = tape.backward(loss)?;
    let out = pv
        .iter()
        .zip(model.params().tensors())
        .map(|(&v, p)| grads.take(v).unwrap_or_else(|| Tensor::zeros(p.shape())))
        .collect();
    Ok((value, out))
}

/// Trains one model per configured seed.
pub fn train(cfg: &TrainConfig, progress: &mut dyn FnMut(&MetricsRow)) -> Result<Vec<TrainOutcome>> {
    cfg.validate()?;
    cfg.seeds.iter().map(|&seed| train_run(cfg, seed, progress)).collect()
}

/// Teacher-forced training with Adam. Graph `b` of step `s` is item
/// `s * batch + b` of the data stream (modulo the pool size when set), so a
/// run is a pure function of its configuration.
pub fn train_run(cfg: &TrainConfig, seed: u64, progress: &mut dyn FnMut(&MetricsRow)) -> Result<TrainOutcome> {
    cfg.validate()?;
    let started = Instant::now();
    let mut model = Model::<f32>::new(cfg.model.clone(), stream_seed(seed, INIT))?;
    let mut adam = Adam::new(cfg.adam());
    let eval_graphs = if cfg.eval_every > 0 { sample_graphs(&cfg.eval, seed, "eval", cfg.eval_samples)? } else { Vec::new() };
    let pool: Option<Vec<WeightedGraph>> =
        cfg.train_pool.map(|k| sample_graphs(&cfg.train, seed, DATAGEN, k)).transpose()?;

    let feed_stream = stream_seed(seed, "hint-feed");
    let mut metrics = Vec::new();
    let (mut window_loss, mut window_len) = (0.0, 0usize);
    let mut final_loss = f64::NAN;
    for step in 1..=cfg.steps {
        let mut sum: Vec<Tensor<f32>> = model.params().tensors().iter().map(|p| Tensor::zeros(p.shape())).collect();
        let mut batch_loss = 0.0;
        for b in 0..cfg.batch_size {
            let index = ((step - 1) * cfg.batch_size + b) as u64;
            let owned;
            let g = match &pool {
                Some(p) => &p[index as usize % p.len()],
                None => {
                    owned = sample_graph(&cfg.train, seed, DATAGEN, index)?;
                    &owned
                }
            };
            let (loss, grads) = graph_grads(&model, g, cfg, item_seed(feed_stream, index))?;
            if !loss.is_finite() {
                return Err(TrainError::Diverged { step, what: format!("loss {loss}") });
            }
            batch_loss += loss;
            for (acc, g) in sum.iter_mut().zip(&grads) {
                for (a, x) in acc.data_mut().iter_mut().zip(g.data()) {
                    *a += x;
                }
            }
        }
        let scale = 1.0 / cfg.batch_size as f32;
        for acc in &mut sum {
            acc.data_mut().iter_mut().for_each(|a| *a *= scale);
        }
        adam.step(model.params_mut().tensors_mut(), &sum)
            .map_err(|e| TrainError::Diverged { step, what: e.to_string() })?;
        if !model.params().all_finite() {
            return Err(TrainError::Diverged { step, what: "non-finite parameters".into() });
        }
        batch_loss /= cfg.batch_size as f64;
        final_loss = batch_loss;
        window_loss += batch_loss;
        window_len += 1;

        let log_now = cfg.log_every > 0 && step % cfg.log_every == 0;
        let eval_now = cfg.eval_every > 0 && step % cfg.eval_every == 0;
        if log_now || eval_now || step == cfg.steps {
            let eval_acc = if eval_now || (cfg.eval_every > 0 && step == cfg.steps) {
                Some(evaluate_graphs(&model, cfg.task, &eval_graphs, 0)?.pointer_accuracy)
            } else {
                None
            };
            let row = MetricsRow { run_seed: seed, step, train_loss: window_loss / window_len as f64, eval_acc };
            log::info!("seed {} step {step}: loss {:.4} eval {:?}", seed, row.train_loss, row.eval_acc);
            progress(&row);
            metrics.push(row);
            window_loss = 0.0;
            window_len = 0;
        }
    }

    let metadata = json!({
        "task": cfg.task,
        "seed": seed,
        "steps": cfg.steps,
        "batch_size": cfg.batch_size,
        "lr": cfg.lr,
        "train": cfg.train,
        "train_pool": cfg.train_pool,
        "own_hint_prob": cfg.own_hint_prob,
        "final_loss": final_loss,
    });
    Ok(TrainOutcome {
        checkpoint: Checkpoint::new(model, metadata),
        metrics,
        final_loss,
        seconds: started.elapsed().as_secs_f64(),
    })
}
