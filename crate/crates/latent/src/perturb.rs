use narlab_algorithms::Task;
use narlab_graph::seed::{item_seed, rng_from, stream_seed, NOISE};
use narlab_graph::WeightedGraph;
use narlab_model::{Feed, Model};
use narlab_tensor::{Real, Tensor};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::aggregate::NodeAgg;
use crate::directions::DirectionDatabase;
use crate::{LatentError, Result};

named_enum!(PerturbMode, "perturbation mode", [
    NoiseFree => "noise_free",
    Directional => "directional",
    Random => "random",
    ProjectOut => "project_out",
    ProjectOnto => "project_onto",
]);

named_enum!(Selector, "direction selector", [
    L2Closest => "l2_closest",
    Mean => "mean",
]);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerturbReport {
    pub mode: PerturbMode,
    pub selector: Selector,
    /// Fixed noise scale, or `None` for the per-step database default.
    pub sigma: Option<f64>,
    pub graphs: usize,
    pub nodes: usize,
    pub accuracy: f64,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Change to the aggregated latent `a` at `step`.
fn delta(
    db: &DirectionDatabase,
    mode: PerturbMode,
    selector: Selector,
    sigma: Option<f64>,
    step: usize,
    a: &[f64],
    rng: &mut impl Rng,
) -> Vec<f64> {
    let (u, c): (&[f64], &[f64]) = match selector {
        Selector::L2Closest => {
            let e = db.closest(step, a).expect("database has entries at every step");
            (&e.direction, &e.centroid)
        }
        Selector::Mean => (&db.mean_direction, &db.mean_centroids[step.clamp(1, db.steps) - 1]),
    };
    let sigma = sigma.unwrap_or_else(|| db.default_sigma(step));
    match mode {
        PerturbMode::NoiseFree => vec![0.0; a.len()],
        PerturbMode::Directional => {
            let xi: f64 = rng.sample(StandardNormal);
            u.iter().map(|ui| sigma * xi * ui).collect()
        }
        PerturbMode::Random => {
            let xi: f64 = rng.sample(StandardNormal);
            let r: Vec<f64> = (0..a.len()).map(|_| rng.sample(StandardNormal)).collect();
            let norm = r.iter().map(|x| x * x).sum::<f64>().sqrt();
            r.iter().map(|ri| sigma * xi * ri / norm).collect()
        }
        PerturbMode::ProjectOut => {
            let off: Vec<f64> = a.iter().zip(c).map(|(x, ci)| x - ci).collect();
            let k = dot(&off, u);
            u.iter().map(|ui| -k * ui).collect()
        }
        PerturbMode::ProjectOnto => {
            let off: Vec<f64> = a.iter().zip(c).map(|(x, ci)| x - ci).collect();
            let k = dot(&off, u);
            off.iter().zip(u).map(|(o, ui)| k * ui - o).collect()
        }
    }
}

/// Runs every graph for its oracle step count while perturbing the
/// max-aggregated latent at each step; the change is added to every node.
pub fn perturb_eval<F: Real>(
    model: &Model<F>,
    task: Task,
    db: &DirectionDatabase,
    graphs: &[WeightedGraph],
    mode: PerturbMode,
    selector: Selector,
    sigma: Option<f64>,
    seed: u64,
) -> Result<PerturbReport> {
    if let Some(s) = sigma {
        if !(s >= 0.0) {
            return Err(LatentError::Config(format!("sigma must be non-negative, got {s}")));
        }
    }
    if db.dim != model.config().latent_dim {
        return Err(LatentError::Shape(format!("database dim {} vs latent dim {}", db.dim, model.config().latent_dim)));
    }
    let stream = stream_seed(seed, NOISE);
    let (mut correct, mut nodes) = (0usize, 0usize);
    for (i, g) in graphs.iter().enumerate() {
        let truth = task.trace(g);
        let mut rng = rng_from(item_seed(stream, i as u64));
        let d = db.dim;
        let mut hook = |t: usize, z: &mut Tensor<F>| {
            let flat: Vec<f64> = z.to_f64_vec();
            let a = NodeAgg::Max.reduce(&flat, d);
            let dz = delta(db, mode, selector, sigma, t, &a, &mut rng);
            for (j, x) in z.data_mut().iter_mut().enumerate() {
                *x = F::from_f64(flat[j] + dz[j % d]);
            }
        };
        let out = model.run_with(g, truth.terminated_at().max(1), Feed::SelfRollout, &mut hook)?;
        correct += out.trace.last().pi.iter().zip(&truth.last().pi).filter(|(a, b)| a == b).count();
        nodes += g.n();
    }
    Ok(PerturbReport {
        mode,
        selector,
        sigma,
        graphs: graphs.len(),
        nodes,
        accuracy: if nodes == 0 { f64::NAN } else { correct as f64 / nodes as f64 },
    })
}
