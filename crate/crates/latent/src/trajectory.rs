//! Latent trajectories and their binary dump format.
//!
//! ```text
//! b"NARTRAJ1" | header length (u64 LE) | JSON header | f32 LE payload
//! ```
//!
//! The header is `{shape: [N, V, D, T], dtype: "f32", order: "row-major",
//! metadata}`.

use std::path::Path;

use narlab_algorithms::Task;
use narlab_graph::seed::{item_seed, stream_seed};
use narlab_graph::{generate_er, GeneratorSpec, WeightedGraph};
use narlab_model::{Feed, Model};
use narlab_tensor::Real;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::{LatentError, Result};

pub const TRAJECTORY_MAGIC: &[u8; 8] = b"NARTRAJ1";

/// Latents of `N` executions: shape `[N, V, D, T]`, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryTensor {
    shape: [usize; 4],
    data: Vec<f32>,
    pub metadata: Value,
}

#[derive(Serialize, Deserialize)]
struct Header {
    shape: [usize; 4],
    dtype: String,
    order: String,
    #[serde(default)]
    metadata: Value,
}

impl TrajectoryTensor {
    pub fn new(shape: [usize; 4], data: Vec<f32>, metadata: Value) -> Result<Self> {
        if shape.iter().product::<usize>() != data.len() {
            return Err(LatentError::Shape(format!("shape {shape:?} does not hold {} values", data.len())));
        }
        if shape.contains(&0) {
            return Err(LatentError::Shape(format!("empty axis in {shape:?}")));
        }
        if data.iter().any(|x| !x.is_finite()) {
            return Err(LatentError::NonFinite("trajectory contains non-finite latents".into()));
        }
        Ok(Self { shape, data, metadata })
    }

    /// Stacks per-sample latents `latents[s][t]` of shape `[V, D]`.
    pub fn from_latents<F: Real>(latents: &[Vec<narlab_tensor::Tensor<F>>], metadata: Value) -> Result<Self> {
        let first = latents.first().and_then(|l| l.first()).ok_or_else(|| LatentError::Shape("no latents".into()))?;
        let (n, v, d, t) = (latents.len(), first.rows(), first.last_dim(), latents[0].len());
        let mut data = vec![0f32; n * v * d * t];
        for (s, steps) in latents.iter().enumerate() {
            if steps.len() != t {
                return Err(LatentError::Shape(format!("sample {s} has {} steps, expected {t}", steps.len())));
            }
            for (ti, z) in steps.iter().enumerate() {
                if z.shape() != [v, d] {
                    return Err(LatentError::Shape(format!("sample {s} step {ti}: shape {:?}", z.shape())));
                }
                for (i, x) in z.data().iter().enumerate() {
                    data[((s * v + i / d) * d + i % d) * t + ti] = x.as_f64() as f32;
                }
            }
        }
        Self::new([n, v, d, t], data, metadata)
    }

    pub fn shape(&self) -> [usize; 4] {
        self.shape
    }

    pub fn samples(&self) -> usize {
        self.shape[0]
    }

    pub fn nodes(&self) -> usize {
        self.shape[1]
    }

    pub fn dim(&self) -> usize {
        self.shape[2]
    }

    pub fn steps(&self) -> usize {
        self.shape[3]
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn get(&self, s: usize, v: usize, d: usize, t: usize) -> f32 {
        let [_, nv, nd, nt] = self.shape;
        self.data[((s * nv + v) * nd + d) * nt + t]
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let header = Header {
            shape: self.shape,
            dtype: "f32".into(),
            order: "row-major".into(),
            metadata: self.metadata.clone(),
        };
        let json = serde_json::to_vec(&header).expect("header serialises");
        let mut out = Vec::with_capacity(16 + json.len() + 4 * self.data.len());
        out.extend_from_slice(TRAJECTORY_MAGIC);
        out.extend_from_slice(&(json.len() as u64).to_le_bytes());
        out.extend_from_slice(&json);
        for x in &self.data {
            out.extend_from_slice(&x.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let bad = |m: &str| LatentError::Format(m.to_string());
        if bytes.len() < 16 || &bytes[..8] != TRAJECTORY_MAGIC {
            return Err(bad("missing trajectory magic"));
        }
        let len = u64::from_le_bytes(bytes[8..16].try_into().expect("8 bytes")) as usize;
        let body = bytes.get(16..).ok_or_else(|| bad("truncated header"))?;
        if len > body.len() {
            return Err(bad("truncated header"));
        }
        let header: Header = serde_json::from_slice(&body[..len])?;
        if header.dtype != "f32" || header.order != "row-major" {
            return Err(LatentError::Format(format!("unsupported layout {} / {}", header.dtype, header.order)));
        }
        let payload = &body[len..];
        let count: usize = header.shape.iter().product();
        if payload.len() != 4 * count {
            return Err(LatentError::Format(format!("payload holds {} bytes, expected {}", payload.len(), 4 * count)));
        }
        let data = payload.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes"))).collect();
        Self::new(header.shape, data, header.metadata)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_bytes())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_bytes(&std::fs::read(path)?)
    }
}

/// Graphs of the `"trajectory"` stream whose oracle run terminates after
/// exactly `t_filter` steps; errors if `count` are not found within `budget`
/// draws.
pub fn filter_graphs(
    task: Task,
    spec: &GeneratorSpec,
    seed: u64,
    count: usize,
    t_filter: usize,
    budget: usize,
) -> Result<Vec<WeightedGraph>> {
    let stream = stream_seed(seed, "trajectory");
    let mut out = Vec::with_capacity(count);
    for i in 0..budget as u64 {
        if out.len() == count {
            break;
        }
        let g = generate_er(&spec.with_seed(item_seed(stream, i)))?;
        if task.trace(&g).terminated_at() == t_filter {
            out.push(g);
        }
    }
    if out.len() < count {
        return Err(LatentError::NotEnoughGraphs { wanted: count, found: out.len(), t: t_filter, budget });
    }
    Ok(out)
}

/// Self-rollout latents of `graphs` for `steps` steps each.
pub fn record_graphs<F: Real>(model: &Model<F>, graphs: &[WeightedGraph], steps: usize, metadata: Value) -> Result<TrajectoryTensor> {
    let latents = graphs
        .iter()
        .map(|g| Ok(model.run(g, steps, Feed::SelfRollout)?.latents))
        .collect::<Result<Vec<_>>>()?;
    TrajectoryTensor::from_latents(&latents, metadata)
}

/// Samples `count` graphs terminating at `t_filter` and records their latents.
#[allow(clippy::too_many_arguments)]
pub fn record_trajectories<F: Real>(
    model: &Model<F>,
    task: Task,
    spec: &GeneratorSpec,
    seed: u64,
    count: usize,
    t_filter: usize,
    budget: usize,
) -> Result<(TrajectoryTensor, Vec<WeightedGraph>)> {
    if t_filter == 0 {
        return Err(LatentError::Shape("trajectories need at least one step".into()));
    }
    let graphs = filter_graphs(task, spec, seed, count, t_filter, budget)?;
    let metadata = serde_json::json!({
        "task": task,
        "generator": spec,
        "seed": seed,
        "t": t_filter,
    });
    Ok((record_graphs(model, &graphs, t_filter, metadata)?, graphs))
}
