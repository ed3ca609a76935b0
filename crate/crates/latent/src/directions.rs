use std::path::Path;

use narlab_algorithms::Task;
use narlab_graph::seed::{item_seed, rng_from, stream_seed};
use narlab_graph::{generate_er, make_reweighting_cluster, scale_weights, GeneratorSpec, WeightedGraph};
use narlab_model::Model;
use narlab_tensor::Real;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::aggregate::{node_aggregate, per_step_pca, step_wise, NodeAgg};
use crate::pca::PcaResult;
use crate::trajectory::record_graphs;
use crate::{LatentError, Result};

/// First principal direction and centroid of one cluster at one step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DirectionEntry {
    pub cluster: usize,
    /// 1-based execution step.
    pub step: usize,
    pub direction: Vec<f64>,
    pub centroid: Vec<f64>,
    /// Root-mean-square distance of the members to the centroid.
    pub spread: f64,
    pub explained_ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DirectionDatabase {
    pub dim: usize,
    pub steps: usize,
    pub entries: Vec<DirectionEntry>,
    /// Normalised mean of all entry directions.
    pub mean_direction: Vec<f64>,
    /// Mean centroid per step.
    pub mean_centroids: Vec<Vec<f64>>,
}

/// Cluster construction parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClusterSpec {
    pub generator: GeneratorSpec,
    pub clusters: usize,
    pub cluster_size: usize,
    /// Reweighting margin in `(0, 0.5]`.
    pub c: f64,
    /// Oracle termination step every cluster must have.
    pub t_filter: usize,
    /// Maximum number of candidate clusters to draw.
    pub budget: usize,
    pub seed: u64,
}

fn unit(mut v: Vec<f64>) -> Vec<f64> {
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm > 0.0 {
        v.iter_mut().for_each(|x| *x /= norm);
    }
    v
}

impl DirectionDatabase {
    pub fn from_entries(dim: usize, steps: usize, entries: Vec<DirectionEntry>) -> Result<Self> {
        if entries.is_empty() {
            return Err(LatentError::Config("direction database needs at least one entry".into()));
        }
        let mut mean = vec![0.0; dim];
        let mut centroids = vec![vec![0.0; dim]; steps];
        let mut counts = vec![0usize; steps];
        for e in &entries {
            if e.direction.len() != dim || e.centroid.len() != dim || e.step == 0 || e.step > steps {
                return Err(LatentError::Shape(format!("entry ({}, {}) does not fit [{dim}] x {steps}", e.cluster, e.step)));
            }
            mean.iter_mut().zip(&e.direction).for_each(|(m, x)| *m += x);
            centroids[e.step - 1].iter_mut().zip(&e.centroid).for_each(|(m, x)| *m += x);
            counts[e.step - 1] += 1;
        }
        for (c, &k) in centroids.iter_mut().zip(&counts) {
            c.iter_mut().for_each(|x| *x /= k.max(1) as f64);
        }
        Ok(Self { dim, steps, entries, mean_direction: unit(mean), mean_centroids: centroids })
    }

    /// Entries recorded at `step`; later steps fall back to the last one.
    pub fn at_step(&self, step: usize) -> impl Iterator<Item = &DirectionEntry> {
        let s = step.clamp(1, self.steps);
        self.entries.iter().filter(move |e| e.step == s)
    }

    /// Entry at `step` whose centroid is nearest to `a`.
    pub fn closest(&self, step: usize, a: &[f64]) -> Option<&DirectionEntry> {
        let d2 = |e: &DirectionEntry| e.centroid.iter().zip(a).map(|(c, x)| (c - x).powi(2)).sum::<f64>();
        self.at_step(step).min_by(|x, y| d2(x).total_cmp(&d2(y)))
    }

    /// Mean within-cluster spread at `step`.
    pub fn default_sigma(&self, step: usize) -> f64 {
        let (sum, k) = self.at_step(step).fold((0.0, 0usize), |(s, k), e| (s + e.spread, k + 1));
        sum / k.max(1) as f64
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, serde_json::to_vec(self)?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let db: Self = serde_json::from_slice(&std::fs::read(path)?)?;
        Self::from_entries(db.dim, db.steps, db.entries)
    }
}

named_enum!(ClusterKind, "cluster kind", [
    Reweight => "reweight",
    Scale => "scale",
]);

/// Graphs that share one execution trace: reweighted copies of a base graph
/// (margin `c`), or copies with weights scaled by `λ` drawn from `(0.5, 1)`.
/// Only clusters whose members all terminate at `t_filter` are kept.
pub fn find_clusters(task: Task, spec: &ClusterSpec, kind: ClusterKind) -> Result<Vec<Vec<WeightedGraph>>> {
    if spec.cluster_size < 2 {
        return Err(LatentError::Config("clusters need at least two members".into()));
    }
    if spec.t_filter == 0 {
        return Err(LatentError::Config("t_filter must be at least 1".into()));
    }
    let stream = match kind {
        ClusterKind::Reweight => stream_seed(spec.seed, "direction-clusters"),
        ClusterKind::Scale => stream_seed(spec.seed, "scale-clusters"),
    };
    let mut clusters = Vec::new();
    for i in 0..spec.budget as u64 {
        if clusters.len() == spec.clusters {
            break;
        }
        let seed = item_seed(stream, i);
        let members = match kind {
            ClusterKind::Reweight => make_reweighting_cluster(&spec.generator, spec.c, spec.cluster_size, seed)?,
            ClusterKind::Scale => {
                let base = generate_er(&spec.generator.with_seed(seed))?;
                let mut rng = rng_from(item_seed(seed, 1));
                let mut members = vec![base.clone()];
                while members.len() < spec.cluster_size {
                    let lambda: f64 = rng.random_range(0.5..1.0);
                    if lambda > 0.5 {
                        members.push(scale_weights(&base, lambda)?);
                    }
                }
                members
            }
        };
        if members.iter().all(|g| task.trace(g).terminated_at() == spec.t_filter) {
            clusters.push(members);
        }
    }
    if clusters.len() < spec.clusters {
        return Err(LatentError::NotEnoughGraphs {
            wanted: spec.clusters,
            found: clusters.len(),
            t: spec.t_filter,
            budget: spec.budget,
        });
    }
    Ok(clusters)
}

/// Step-wise projection of one cluster member at one step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterPoint {
    pub cluster: usize,
    pub member: usize,
    /// 1-based execution step.
    pub step: usize,
    pub coords: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClusterProjection {
    pub pca: PcaResult,
    pub points: Vec<ClusterPoint>,
    /// Mean distance of members to their cluster centroid, per step.
    pub within: Vec<f64>,
    /// Mean distance between centroids of different clusters, per step.
    pub between: Vec<f64>,
}

/// Records every cluster, fits one step-wise PCA on all members together
/// and measures cluster separation in the projected space.
pub fn cluster_projection<F: Real>(
    model: &Model<F>,
    task: Task,
    spec: &ClusterSpec,
    kind: ClusterKind,
    k: usize,
) -> Result<ClusterProjection> {
    let clusters = find_clusters(task, spec, kind)?;
    let graphs: Vec<WeightedGraph> = clusters.concat();
    let agg = node_aggregate(&record_graphs(model, &graphs, spec.t_filter, serde_json::Value::Null)?, NodeAgg::Max);
    let (pca, projected) = step_wise(&agg, k)?;
    let size = spec.cluster_size;
    let points: Vec<ClusterPoint> = projected
        .into_iter()
        .map(|p| ClusterPoint { cluster: p.sample / size, member: p.sample % size, step: p.step, coords: p.coords })
        .collect();
    let dist = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    let (mut within, mut between) = (Vec::new(), Vec::new());
    for t in 1..=spec.t_filter {
        let at: Vec<&ClusterPoint> = points.iter().filter(|p| p.step == t).collect();
        let centroids: Vec<Vec<f64>> = (0..clusters.len())
            .map(|c| {
                let mut m = vec![0.0; pca.components.len()];
                for p in at.iter().filter(|p| p.cluster == c) {
                    m.iter_mut().zip(&p.coords).for_each(|(m, x)| *m += x / size as f64);
                }
                m
            })
            .collect();
        within.push(at.iter().map(|p| dist(&p.coords, &centroids[p.cluster])).sum::<f64>() / at.len() as f64);
        let mut pairs = (0.0, 0usize);
        for a in 0..centroids.len() {
            for b in a + 1..centroids.len() {
                pairs = (pairs.0 + dist(&centroids[a], &centroids[b]), pairs.1 + 1);
            }
        }
        between.push(if pairs.1 == 0 { f64::NAN } else { pairs.0 / pairs.1 as f64 });
    }
    Ok(ClusterProjection { pca, points, within, between })
}

/// Builds reweighting clusters terminating at `t_filter`, records their
/// latents and keeps, per cluster and step, the first principal component of
/// the node-aggregated members.
pub fn build_direction_db<F: Real>(model: &Model<F>, task: Task, spec: &ClusterSpec) -> Result<DirectionDatabase> {
    let mut entries = Vec::new();
    for (cluster, members) in find_clusters(task, spec, ClusterKind::Reweight)?.iter().enumerate() {
        let traj = record_graphs(model, members, spec.t_filter, serde_json::Value::Null)?;
        let agg = node_aggregate(&traj, NodeAgg::Max);
        for (t, res) in per_step_pca(&agg, 1)?.into_iter().enumerate() {
            let spread = ((0..agg.samples)
                .map(|s| agg.point(s, t).iter().zip(&res.mean).map(|(x, m)| (x - m).powi(2)).sum::<f64>())
                .sum::<f64>()
                / agg.samples as f64)
                .sqrt();
            entries.push(DirectionEntry {
                cluster,
                step: t + 1,
                direction: res.components[0].clone(),
                centroid: res.mean,
                spread,
                explained_ratio: res.explained_variance_ratios[0],
            });
        }
    }
    DirectionDatabase::from_entries(model.config().latent_dim, spec.t_filter, entries)
}
