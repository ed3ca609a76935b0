use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::seed::rng_from;
use crate::{GraphError, Result, WeightedGraph};

/// Attempts made before [`generate_er`] gives up on a degenerate sample.
pub const MAX_GENERATION_ATTEMPTS: usize = 100;

/// Erdős-Rényi generator parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeneratorSpec {
    pub n: usize,
    /// Independent edge probability for each unordered pair.
    pub p: f64,
    pub weight_low: f64,
    pub weight_high: f64,
    pub seed: u64,
}

impl GeneratorSpec {
    pub fn new(n: usize, p: f64, seed: u64) -> Self {
        Self { n, p, weight_low: 0.0, weight_high: 1.0, seed }
    }

    pub fn with_seed(self, seed: u64) -> Self {
        Self { seed, ..self }
    }

    pub fn with_weight_range(self, low: f64, high: f64) -> Self {
        Self { weight_low: low, weight_high: high, ..self }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 2 {
            return Err(GraphError::TooFewNodes(self.n));
        }
        if !(0.0..=1.0).contains(&self.p) {
            return Err(GraphError::InvalidSpec(format!("p={} outside [0, 1]", self.p)));
        }
        if !(0.0 <= self.weight_low && self.weight_low < self.weight_high && self.weight_high <= 1.0)
        {
            return Err(GraphError::InvalidSpec(format!(
                "weight range ({}, {}) must satisfy 0 <= low < high <= 1",
                self.weight_low, self.weight_high
            )));
        }
        Ok(())
    }
}

/// Samples a symmetric Erdős-Rényi graph with uniform weights in the open
/// interval `(weight_low, weight_high)` and a uniformly chosen source.
///
/// Samples whose source has no outgoing edge are redrawn, up to
/// [`MAX_GENERATION_ATTEMPTS`] times.
pub fn generate_er(spec: &GeneratorSpec) -> Result<WeightedGraph> {
    spec.validate()?;
    let n = spec.n;
    let mut rng = rng_from(spec.seed);
    for _ in 0..MAX_GENERATION_ATTEMPTS {
        let mut weights = vec![0.0; n * n];
        for u in 0..n {
            for v in (u + 1)..n {
                if rng.random::<f64>() < spec.p {
                    let w = loop {
                        let w = rng.random_range(spec.weight_low..spec.weight_high);
                        if w > spec.weight_low {
                            break w;
                        }
                    };
                    weights[u * n + v] = w;
                    weights[v * n + u] = w;
                }
            }
        }
        let source = rng.random_range(0..n);
        let graph = WeightedGraph::from_parts_unchecked(n, weights, source);
        if graph.out_degree(source) > 0 {
            return Ok(graph);
        }
    }
    Err(GraphError::Degenerate { attempts: MAX_GENERATION_ATTEMPTS })
}
