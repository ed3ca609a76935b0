use std::collections::BTreeMap;

use narlab_algorithms::{ExecutionTrace, Task};
use narlab_graph::{GeneratorSpec, WeightedGraph};
use narlab_model::{Checkpoint, Feed, Model};
use narlab_tensor::Real;
use serde::{Deserialize, Serialize};

use crate::data::sample_graphs;
use crate::stats::mean_std;
use crate::{Result, TrainError};

/// Width of the distance bins in mispredict reports.
pub const DISTANCE_BIN: f64 = 0.25;

/// Anything that produces a predicted trace for a graph and a step budget.
pub trait Executor {
    fn execute(&self, g: &WeightedGraph, steps: usize) -> Result<ExecutionTrace>;
}

impl<F: Real> Executor for Model<F> {
    fn execute(&self, g: &WeightedGraph, steps: usize) -> Result<ExecutionTrace> {
        Ok(self.run(g, steps, Feed::SelfRollout)?.trace)
    }
}

/// Ground truth as an executor; runs past termination repeat the fixed point.
#[derive(Debug, Clone, Copy)]
pub struct OracleExecutor(pub Task);

impl Executor for OracleExecutor {
    fn execute(&self, g: &WeightedGraph, steps: usize) -> Result<ExecutionTrace> {
        let full = self.0.trace(g);
        Ok(ExecutionTrace { steps: (0..=steps).map(|t| full.at(t).clone()).collect() })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinRate {
    pub lo: f64,
    pub hi: f64,
    pub nodes: usize,
    pub mispredicted: usize,
    pub rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepsRow {
    /// Oracle termination step (or the forced offset in forced-step tables).
    pub key: i64,
    pub graphs: usize,
    pub nodes: usize,
    pub accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub task: Task,
    pub graphs: usize,
    pub nodes: usize,
    /// Node-mean of correct final pointers (mean over runs for combined reports).
    pub pointer_accuracy: f64,
    /// Standard deviation over runs; 0 for a single run.
    pub pointer_accuracy_std: f64,
    pub run_accuracies: Vec<f64>,
    /// Mean oracle distance over reachable non-source nodes.
    pub mean_true_distance: f64,
    /// Mispredict rate of reachable nodes binned by oracle distance.
    pub by_true_distance: Vec<BinRate>,
    /// Mispredict rate binned by the model's decoded distance.
    pub by_predicted_distance: Vec<BinRate>,
    pub by_steps: Vec<StepsRow>,
    /// `(oracle, predicted)` final distances where both are finite.
    pub distance_pairs: Vec<(f64, f64)>,
}

#[derive(Default)]
struct Bins(BTreeMap<usize, (usize, usize)>);

impl Bins {
    fn add(&mut self, d: f64, wrong: bool) {
        let e = self.0.entry((d.max(0.0) / DISTANCE_BIN) as usize).or_default();
        e.0 += 1;
        e.1 += wrong as usize;
    }

    /// Contiguous bins from 0 up to the largest observed one.
    fn rows(&self) -> Vec<BinRate> {
        let top = self.0.keys().next_back().map_or(0, |&k| k + 1);
        (0..top)
            .map(|k| {
                let (nodes, mispredicted) = self.0.get(&k).copied().unwrap_or_default();
                BinRate {
                    lo: k as f64 * DISTANCE_BIN,
                    hi: (k + 1) as f64 * DISTANCE_BIN,
                    nodes,
                    mispredicted,
                    rate: if nodes == 0 { f64::NAN } else { mispredicted as f64 / nodes as f64 },
                }
            })
            .collect()
    }
}

/// Correct final pointers on one graph after `steps` steps.
fn score(exec: &dyn Executor, g: &WeightedGraph, truth: &ExecutionTrace, steps: usize) -> Result<(usize, ExecutionTrace)> {
    let pred = exec.execute(g, steps)?;
    let correct = pred.last().pi.iter().zip(&truth.last().pi).filter(|(a, b)| a == b).count();
    Ok((correct, pred))
}

/// Runs every graph for its oracle step count plus `delta` (at least one
/// step) and fills a report.
pub fn evaluate_graphs(exec: &dyn Executor, task: Task, graphs: &[WeightedGraph], delta: i64) -> Result<EvalReport> {
    let (mut correct, mut nodes) = (0usize, 0usize);
    let mut true_bins = Bins::default();
    let mut pred_bins = Bins::default();
    let mut per_t: BTreeMap<i64, (usize, usize, usize)> = BTreeMap::new();
    let mut pairs = Vec::new();
    let (mut dist_sum, mut dist_count) = (0.0, 0usize);
    for g in graphs {
        let truth = task.trace(g);
        let t = truth.terminated_at().max(1) as i64;
        let (c, pred) = score(exec, g, &truth, (t + delta).max(1) as usize)?;
        correct += c;
        nodes += g.n();
        let e = per_t.entry(t).or_default();
        e.0 += 1;
        e.1 += g.n();
        e.2 += c;
        let (tl, pl) = (truth.last(), pred.last());
        for v in 0..g.n() {
            let wrong = tl.pi[v] != pl.pi[v];
            if tl.dist[v].is_finite() {
                true_bins.add(tl.dist[v], wrong);
                if v != g.source() {
                    dist_sum += tl.dist[v];
                    dist_count += 1;
                }
                if pl.dist[v].is_finite() {
                    pairs.push((tl.dist[v], pl.dist[v]));
                }
            }
            if pl.dist[v].is_finite() {
                pred_bins.add(pl.dist[v], wrong);
            }
        }
    }
    let accuracy = if nodes == 0 { f64::NAN } else { correct as f64 / nodes as f64 };
    Ok(EvalReport {
        task,
        graphs: graphs.len(),
        nodes,
        pointer_accuracy: accuracy,
        pointer_accuracy_std: 0.0,
        run_accuracies: vec![accuracy],
        mean_true_distance: dist_sum / dist_count.max(1) as f64,
        by_true_distance: true_bins.rows(),
        by_predicted_distance: pred_bins.rows(),
        by_steps: per_t
            .into_iter()
            .map(|(key, (graphs, nodes, c))| StepsRow { key, graphs, nodes, accuracy: c as f64 / nodes as f64 })
            .collect(),
        distance_pairs: pairs,
    })
}

/// Task recorded in a checkpoint's metadata, if any.
pub fn checkpoint_task(ckpt: &Checkpoint) -> Option<Task> {
    serde_json::from_value(ckpt.metadata.get("task")?.clone()).ok()
}

/// Evaluates a checkpoint on `samples` graphs of the `"test"` stream of `seed`.
pub fn evaluate(ckpt: &Checkpoint, task: Task, spec: &GeneratorSpec, seed: u64, samples: usize) -> Result<EvalReport> {
    if let Some(trained) = checkpoint_task(ckpt) {
        if trained != task {
            return Err(TrainError::TaskMismatch { trained: trained.to_string(), requested: task.to_string() });
        }
    }
    let graphs = sample_graphs(spec, seed, "test", samples)?;
    evaluate_graphs(&ckpt.model, task, &graphs, 0)
}

/// Merges single-run reports: accuracy becomes the mean over runs with its
/// standard deviation; bins, step rows and pairs are pooled.
pub fn combine_reports(reports: &[EvalReport]) -> Option<EvalReport> {
    let first = reports.first()?;
    let accs: Vec<f64> = reports.iter().flat_map(|r| r.run_accuracies.iter().copied()).collect();
    let (mean, std) = mean_std(&accs);
    let mut true_bins = Bins::default();
    let mut pred_bins = Bins::default();
    let mut per_t: BTreeMap<i64, (usize, usize, f64)> = BTreeMap::new();
    let (mut dist_weighted, mut nodes) = (0.0, 0usize);
    for r in reports {
        for (bins, rows) in [(&mut true_bins, &r.by_true_distance), (&mut pred_bins, &r.by_predicted_distance)] {
            for (k, b) in rows.iter().enumerate() {
                let e = bins.0.entry(k).or_default();
                e.0 += b.nodes;
                e.1 += b.mispredicted;
            }
        }
        for s in &r.by_steps {
            let e = per_t.entry(s.key).or_default();
            e.0 += s.graphs;
            e.1 += s.nodes;
            e.2 += s.accuracy * s.nodes as f64;
        }
        dist_weighted += r.mean_true_distance * r.nodes as f64;
        nodes += r.nodes;
    }
    Some(EvalReport {
        task: first.task,
        graphs: reports.iter().map(|r| r.graphs).sum(),
        nodes,
        pointer_accuracy: mean,
        pointer_accuracy_std: std,
        run_accuracies: accs,
        mean_true_distance: dist_weighted / nodes.max(1) as f64,
        by_true_distance: true_bins.rows(),
        by_predicted_distance: pred_bins.rows(),
        by_steps: per_t
            .into_iter()
            .map(|(key, (graphs, nodes, c))| StepsRow { key, graphs, nodes, accuracy: c / nodes as f64 })
            .collect(),
        distance_pairs: reports.iter().flat_map(|r| r.distance_pairs.iter().copied()).collect(),
    })
}

/// Accuracy grouped by oracle termination step.
pub fn accuracy_vs_steps(exec: &dyn Executor, task: Task, graphs: &[WeightedGraph]) -> Result<Vec<StepsRow>> {
    Ok(evaluate_graphs(exec, task, graphs, 0)?.by_steps)
}

/// Accuracy when running `T + delta` steps. Graphs with `T + delta < 1` are
/// left out of that delta's row.
pub fn forced_steps_eval(exec: &dyn Executor, task: Task, graphs: &[WeightedGraph], deltas: &[i64]) -> Result<Vec<StepsRow>> {
    let truths: Vec<ExecutionTrace> = graphs.iter().map(|g| task.trace(g)).collect();
    let mut rows = Vec::with_capacity(deltas.len());
    for &delta in deltas {
        let (mut used, mut nodes, mut correct) = (0, 0, 0);
        for (g, truth) in graphs.iter().zip(&truths) {
            let steps = truth.terminated_at().max(1) as i64 + delta;
            if steps < 1 {
                log::warn!("skipping graph with T={} for delta {delta}", truth.terminated_at());
                continue;
            }
            correct += score(exec, g, truth, steps as usize)?.0;
            used += 1;
            nodes += g.n();
        }
        let accuracy = if nodes == 0 { f64::NAN } else { correct as f64 / nodes as f64 };
        rows.push(StepsRow { key: delta, graphs: used, nodes, accuracy });
    }
    Ok(rows)
}
