use narlab_model::{Aggregator, DecayMode};
use narlab_training::{evaluate_graphs, mean_std, sample_graphs, train_run};
use serde::Serialize;
use serde_json::json;

use super::echo;
use super::train::{checkpoint_name, train_config};
use crate::args::AblateArgs;
use crate::error::Result;
use crate::output::{OutputDir, RunManifest};

#[derive(Serialize)]
struct CellRow {
    cell: usize,
    processor: String,
    aggregator: String,
    temperature: Option<f64>,
    decay: f64,
    decay_mode: String,
    seeds: usize,
    mean_accuracy: f64,
    std_accuracy: f64,
}

#[derive(Serialize)]
struct RunRow {
    cell: usize,
    run_seed: u64,
    accuracy: f64,
    final_loss: f64,
}

/// Decay and temperature settings of one grid cell; temperature 0 selects
/// the max aggregator.
fn cells(a: &AblateArgs, base_decay: f64, base_mode: DecayMode) -> Vec<(f64, DecayMode, Option<f64>)> {
    let decays = if a.decay_grid.is_empty() { vec![base_decay] } else { a.decay_grid.clone() };
    let modes = if a.decay_modes.is_empty() { vec![base_mode] } else { a.decay_modes.clone() };
    let temps: Vec<Option<f64>> = if a.temp_grid.is_empty() { vec![None] } else { a.temp_grid.iter().map(|&t| Some(t)).collect() };
    let mut out = Vec::new();
    for &d in &decays {
        // Without decay the mode has no effect, so it appears once.
        let ms: &[DecayMode] = if d >= 1.0 { &modes[..1] } else { &modes };
        for &m in ms {
            for &t in &temps {
                out.push((d, m, t));
            }
        }
    }
    out
}

pub(super) fn cmd_ablate(a: &AblateArgs) -> Result<RunManifest> {
    let base = train_config(&a.model)?;
    let eval_graphs = sample_graphs(&base.eval, 0, "test", a.samples)?;
    let mut out = OutputDir::create(&a.out)?;
    let (mut cell_rows, mut run_rows, mut metrics) = (Vec::new(), Vec::new(), Vec::new());
    for (cell, (decay, mode, temp)) in cells(a, base.model.decay_factor, base.model.decay_mode).into_iter().enumerate() {
        let mut cfg = base.clone();
        cfg.model.decay_factor = decay;
        cfg.model.decay_mode = mode;
        match temp {
            Some(t) if t > 0.0 => {
                cfg.model.aggregator = Aggregator::Softmax;
                cfg.model.softmax_temperature = t;
            }
            Some(_) => cfg.model.aggregator = Aggregator::Max,
            None => {}
        }
        let mut accs = Vec::new();
        for &seed in &cfg.seeds {
            let outcome = train_run(&cfg, seed, &mut |r| metrics.push((cell, r.clone())))?;
            let acc = evaluate_graphs(&outcome.checkpoint.model, cfg.task, &eval_graphs, 0)?.pointer_accuracy;
            log::info!("cell {cell} (decay {decay} {mode}, temp {temp:?}) seed {seed}: {acc:.4}");
            if a.keep_checkpoints {
                out.write(&format!("cell{cell}_{}", checkpoint_name(seed)), &outcome.checkpoint.to_bytes())?;
            }
            run_rows.push(RunRow { cell, run_seed: seed, accuracy: acc, final_loss: outcome.final_loss });
            accs.push(acc);
        }
        let (mean, std) = mean_std(&accs);
        cell_rows.push(CellRow {
            cell,
            processor: cfg.model.processor.to_string(),
            aggregator: cfg.model.aggregator.to_string(),
            temperature: (cfg.model.aggregator == Aggregator::Softmax).then_some(cfg.model.softmax_temperature),
            decay,
            decay_mode: mode.to_string(),
            seeds: accs.len(),
            mean_accuracy: mean,
            std_accuracy: std,
        });
    }
    #[derive(Serialize)]
    struct MetricsCsv {
        cell: usize,
        run_seed: u64,
        step: usize,
        train_loss: f64,
        eval_acc: Option<f64>,
    }
    let metrics: Vec<MetricsCsv> = metrics
        .into_iter()
        .map(|(cell, r)| MetricsCsv { cell, run_seed: r.run_seed, step: r.step, train_loss: r.train_loss, eval_acc: r.eval_acc })
        .collect();
    out.write_csv("ablation.csv", &cell_rows)?;
    out.write_csv("runs.csv", &run_rows)?;
    out.write_csv("metrics.csv", &metrics)?;
    let config = json!({
        "base": echo(&base),
        "decay_grid": a.decay_grid,
        "temp_grid": a.temp_grid,
        "decay_modes": a.decay_modes,
        "samples": a.samples,
    });
    out.finish("ablate", config, base.seeds.clone())
}
