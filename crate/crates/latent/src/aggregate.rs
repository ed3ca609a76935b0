use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::pca::{pca, PcaResult};
use crate::trajectory::TrajectoryTensor;
use crate::{LatentError, Result};

/// Statistic used to collapse the node axis.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NodeAgg {
    #[default]
    Max,
    Min,
    Mean,
}

impl NodeAgg {
    pub const ALL: [NodeAgg; 3] = [NodeAgg::Max, NodeAgg::Min, NodeAgg::Mean];

    pub fn name(self) -> &'static str {
        match self {
            NodeAgg::Max => "max",
            NodeAgg::Min => "min",
            NodeAgg::Mean => "mean",
        }
    }

    /// Reduces node latents `z[v * dim + d]` to one `dim`-vector.
    pub fn reduce(self, z: &[f64], dim: usize) -> Vec<f64> {
        let nodes = z.len() / dim;
        (0..dim)
            .map(|d| {
                let col = (0..nodes).map(|v| z[v * dim + d]);
                match self {
                    NodeAgg::Max => col.fold(f64::NEG_INFINITY, f64::max),
                    NodeAgg::Min => col.fold(f64::INFINITY, f64::min),
                    NodeAgg::Mean => col.sum::<f64>() / nodes as f64,
                }
            })
            .collect()
    }
}

impl fmt::Display for NodeAgg {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for NodeAgg {
    type Err = LatentError;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL.into_iter().find(|a| a.name() == s).ok_or_else(|| LatentError::Unknown { what: "node aggregation", name: s.into() })
    }
}

/// Node-aggregated trajectories, shape `[N, D, T]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Aggregated {
    pub samples: usize,
    pub dim: usize,
    pub steps: usize,
    data: Vec<f64>,
}

impl Aggregated {
    pub fn new(samples: usize, dim: usize, steps: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != samples * dim * steps {
            return Err(LatentError::Shape(format!("[{samples}, {dim}, {steps}] does not hold {} values", data.len())));
        }
        Ok(Self { samples, dim, steps, data })
    }

    pub fn get(&self, s: usize, d: usize, t: usize) -> f64 {
        self.data[(s * self.dim + d) * self.steps + t]
    }

    /// Latent of sample `s` at step index `t` (0-based).
    pub fn point(&self, s: usize, t: usize) -> Vec<f64> {
        (0..self.dim).map(|d| self.get(s, d, t)).collect()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }
}

pub fn node_aggregate(t: &TrajectoryTensor, mode: NodeAgg) -> Aggregated {
    let [n, v, d, steps] = t.shape();
    let mut data = vec![0.0; n * d * steps];
    let mut z = vec![0.0; v * d];
    for s in 0..n {
        for ti in 0..steps {
            for vi in 0..v {
                for di in 0..d {
                    z[vi * d + di] = t.get(s, vi, di, ti) as f64;
                }
            }
            for (di, x) in mode.reduce(&z, d).into_iter().enumerate() {
                data[(s * d + di) * steps + ti] = x;
            }
        }
    }
    Aggregated { samples: n, dim: d, steps, data }
}

/// One point per sample: the flattened `(D, T)` trajectory.
pub fn trajectory_wise(a: &Aggregated, k: usize) -> Result<PcaResult> {
    let m = DMatrix::from_fn(a.samples, a.dim * a.steps, |s, j| a.get(s, j / a.steps, j % a.steps));
    pca(&m, k.min(a.samples.min(a.dim * a.steps)))
}

/// Projected coordinates of one step-wise point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepPoint {
    pub sample: usize,
    /// 1-based execution step.
    pub step: usize,
    pub coords: Vec<f64>,
}

/// One point per (sample, step); returns the PCA and the projected points
/// ordered by sample, then step.
pub fn step_wise(a: &Aggregated, k: usize) -> Result<(PcaResult, Vec<StepPoint>)> {
    let rows = a.samples * a.steps;
    let m = DMatrix::from_fn(rows, a.dim, |r, d| a.get(r / a.steps, d, r % a.steps));
    let res = pca(&m, k.min(rows.min(a.dim)))?;
    let points = (0..rows)
        .map(|r| {
            let (s, t) = (r / a.steps, r % a.steps);
            StepPoint { sample: s, step: t + 1, coords: res.project(&a.point(s, t)) }
        })
        .collect();
    Ok((res, points))
}

/// Separate PCA of the samples at each step.
pub fn per_step_pca(a: &Aggregated, k: usize) -> Result<Vec<PcaResult>> {
    (0..a.steps)
        .map(|t| {
            let m = DMatrix::from_fn(a.samples, a.dim, |s, d| a.get(s, d, t));
            pca(&m, k.min(a.samples.min(a.dim)))
        })
        .collect()
}
