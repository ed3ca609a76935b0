use narlab_algorithms::{agreement, variant_trace, AgreementMode, ExecutionTrace, Task, VariantKind, VariantSpec};
use narlab_graph::seed::{item_seed, stream_seed, NOISE};
use narlab_graph::{scale_weights, GeneratorSpec, WeightedGraph};
use narlab_training::{evaluate_graphs, sample_graphs, EvalReport, Executor};
use serde::{Deserialize, Serialize};

use crate::aggregate::Aggregated;
use crate::{LatentError, Result};

/// Mean norm of `a[t + 1] - a[t]` over samples, for each of the `T - 1`
/// consecutive step pairs.
pub fn attractor_stats(a: &Aggregated) -> Result<Vec<f64>> {
    if a.steps < 2 {
        return Err(LatentError::Shape("displacements need at least two steps".into()));
    }
    Ok((0..a.steps - 1)
        .map(|t| {
            (0..a.samples)
                .map(|s| (0..a.dim).map(|d| (a.get(s, d, t + 1) - a.get(s, d, t)).powi(2)).sum::<f64>().sqrt())
                .sum::<f64>()
                / a.samples as f64
        })
        .collect())
}

/// Per-node outcome of the model against the oracle's final pointers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeOutcome {
    pub sample: usize,
    pub node: usize,
    pub final_correct: bool,
    pub ever_correct: bool,
    /// First step whose pointer equals the oracle's final one.
    pub first_correct_step: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MispredictReport {
    /// Names of the rows and columns of `agreement`; the model comes first.
    pub names: Vec<String>,
    /// Mean fraction of nodes whose final pointers agree, per pair.
    pub agreement: Vec<Vec<f64>>,
    /// Node fractions `[[final and ever, final and never], [not final and
    /// ever, not final and never]]` correct.
    pub matrix: [[f64; 2]; 2],
    pub counts: [[usize; 2]; 2],
    pub nodes: Vec<NodeOutcome>,
}

impl MispredictReport {
    /// Agreement of the model with each named variant.
    pub fn model_agreement(&self, name: &str) -> Option<f64> {
        self.names.iter().position(|n| n == name).map(|j| self.agreement[0][j])
    }
}

/// Compares the model's final predictions with exact Bellman-Ford and the
/// faulty variants, and splits nodes by final and ever correctness.
pub fn mispredict_report(exec: &dyn Executor, graphs: &[WeightedGraph], variants: &[VariantSpec], seed: u64) -> Result<MispredictReport> {
    let mut names = vec!["model".to_string()];
    names.extend(variants.iter().map(|v| v.kind.name().to_string()));
    let k = names.len();
    let mut agree = vec![vec![0.0; k]; k];
    let mut counts = [[0usize; 2]; 2];
    let mut nodes = Vec::new();
    let stream = stream_seed(seed, NOISE);
    for (i, g) in graphs.iter().enumerate() {
        let truth = Task::BellmanFord.trace(g);
        let steps = truth.terminated_at().max(1);
        let mut traces: Vec<ExecutionTrace> = vec![exec.execute(g, steps)?];
        for v in variants {
            traces.push(variant_trace(g, &v.with_seed(item_seed(stream, i as u64)))?);
        }
        for a in 0..k {
            for b in 0..k {
                agree[a][b] += agreement(&traces[a], &traces[b], AgreementMode::Final)?;
            }
        }
        let model = &traces[0];
        for v in 0..g.n() {
            let target = truth.last().pi[v];
            let final_correct = model.last().pi[v] == target;
            let first = (1..model.steps.len()).find(|&t| model.steps[t].pi[v] == target);
            let ever_correct = first.is_some();
            counts[!final_correct as usize][!ever_correct as usize] += 1;
            nodes.push(NodeOutcome { sample: i, node: v, final_correct, ever_correct, first_correct_step: first });
        }
    }
    let total = nodes.len().max(1) as f64;
    agree.iter_mut().flatten().for_each(|x| *x /= graphs.len().max(1) as f64);
    let matrix = counts.map(|r| r.map(|c| c as f64 / total));
    Ok(MispredictReport { names, agreement: agree, matrix, counts, nodes })
}

/// The four reference executions with default parameters.
pub fn default_variants() -> Vec<VariantSpec> {
    VariantKind::ALL.iter().map(|&k| VariantSpec::new(k)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValGenRow {
    pub p: f64,
    /// Weight multiplier applied before evaluation (1 for plain rows).
    pub scale: f64,
    pub report: EvalReport,
}

/// Accuracy, distance-binned mispredict rates and distance pairs at each edge
/// probability. With `rescale`, every `p` other than `reference_p` is
/// evaluated a second time with weights multiplied by the ratio of mean
/// oracle distances (reference over `p`).
pub fn value_generalisation_report(
    exec: &dyn Executor,
    task: Task,
    n: usize,
    p_values: &[f64],
    reference_p: f64,
    samples: usize,
    seed: u64,
    rescale: bool,
) -> Result<Vec<ValGenRow>> {
    let graphs_at = |p: f64| sample_graphs(&GeneratorSpec::new(n, p, 0), seed, "test", samples);
    let reference = evaluate_graphs(exec, task, &graphs_at(reference_p)?, 0)?;
    let mut rows = Vec::new();
    for &p in p_values {
        let graphs = graphs_at(p)?;
        let report = if p == reference_p { reference.clone() } else { evaluate_graphs(exec, task, &graphs, 0)? };
        let ratio = reference.mean_true_distance / report.mean_true_distance;
        rows.push(ValGenRow { p, scale: 1.0, report });
        if rescale && p != reference_p {
            let scaled = graphs.iter().map(|g| scale_weights(g, ratio)).collect::<std::result::Result<Vec<_>, _>>()?;
            rows.push(ValGenRow { p, scale: ratio, report: evaluate_graphs(exec, task, &scaled, 0)? });
        }
    }
    Ok(rows)
}
