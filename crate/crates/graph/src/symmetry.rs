//! Weight transforms that keep Bellman-Ford's pointer trace unchanged.
//!
//! * scaling `w -> λ w` (λ > 0) scales every distance by λ;
//! * reweighting `w(u, v) -> w(u, v) + h(u) - h(v)` shifts the distance of
//!   node `u` by `h(source) - h(u)`.

use crate::seed::{item_seed, rng_from, stream_seed};
use crate::{generate_er, GeneratorSpec, GraphError, Result, WeightedGraph};

/// One real value per node.
#[derive(Debug, Clone, PartialEq)]
pub struct NodePotential {
    pub h: Vec<f64>,
}

impl NodePotential {
    pub fn zeros(n: usize) -> Self {
        Self { h: vec![0.0; n] }
    }

    /// Uniform potential on the open interval `(0, c)`.
    pub fn sample(n: usize, c: f64, rng: &mut impl rand::Rng) -> Self {
        let h = (0..n)
            .map(|_| loop {
                let x = rng.random_range(0.0..c);
                if x > 0.0 {
                    break x;
                }
            })
            .collect();
        Self { h }
    }
}

/// Multiplies every edge weight by `lambda`; non-edges stay 0.
pub fn scale_weights(g: &WeightedGraph, lambda: f64) -> Result<WeightedGraph> {
    if !(lambda > 0.0) {
        return Err(GraphError::NonPositiveScale(lambda));
    }
    let weights = g.weights().iter().map(|&w| w * lambda).collect();
    Ok(WeightedGraph::from_parts_unchecked(g.n(), weights, g.source()))
}

/// Applies `ŵ(u, v) = w(u, v) + h[u] - h[v]` to every edge.
///
/// A non-positive result is always an error, since zero encodes "no edge".
/// With `strict` set, results must also stay below 1.
pub fn reweight(g: &WeightedGraph, h: &NodePotential, strict: bool) -> Result<WeightedGraph> {
    let n = g.n();
    if h.h.len() != n {
        return Err(GraphError::PotentialSize { expected: n, got: h.h.len() });
    }
    let mut weights = vec![0.0; n * n];
    for (u, v, w) in g.edges() {
        let nw = w + h.h[u] - h.h[v];
        if !(nw > 0.0) || (strict && nw >= 1.0) {
            return Err(GraphError::WeightOutOfRange { u, v, weight: nw });
        }
        weights[u * n + v] = nw;
    }
    Ok(WeightedGraph::from_parts_unchecked(n, weights, g.source()))
}

/// Samples a base graph with weights in `(c, 1 - c)` and `k - 1` reweighted
/// copies with potentials drawn from `(0, c)`. All members stay in `(0, 1)`
/// and share one pointer trace.
///
/// At `c = 0.5` the weight interval collapses to the single value 0.5, so the
/// base graph keeps its random topology with every weight equal to 0.5.
pub fn make_reweighting_cluster(
    spec: &GeneratorSpec,
    c: f64,
    k: usize,
    seed: u64,
) -> Result<Vec<WeightedGraph>> {
    if !(c > 0.0 && c <= 0.5) {
        return Err(GraphError::InvalidSpec(format!("cluster margin c={c} outside (0, 0.5]")));
    }
    if k == 0 {
        return Err(GraphError::InvalidSpec("cluster size must be at least 1".into()));
    }
    let base_seed = item_seed(stream_seed(seed, "cluster-base"), 0);
    let base = if 1.0 - 2.0 * c > 1e-12 {
        generate_er(&GeneratorSpec { weight_low: c, weight_high: 1.0 - c, seed: base_seed, ..*spec })?
    } else {
        let g = generate_er(&GeneratorSpec { seed: base_seed, ..*spec })?;
        let weights = g.weights().iter().map(|&w| if w != 0.0 { 0.5 } else { 0.0 }).collect();
        WeightedGraph::from_parts_unchecked(g.n(), weights, g.source())
    };
    let mut rng = rng_from(stream_seed(seed, "cluster-potential"));
    let mut out = Vec::with_capacity(k);
    out.push(base.clone());
    for _ in 1..k {
        let h = NodePotential::sample(base.n(), c, &mut rng);
        out.push(reweight(&base, &h, true)?);
    }
    Ok(out)
}
