//! Faulty Bellman-Ford implementations used to probe what a trained model
//! actually learned.
//!
//! * `greedy` assigns each newly reached node the in-neighbour with the
//!   lightest edge, comparing weights instead of full path lengths, and never
//!   revisits the choice.
//! * `decay` multiplies every candidate `d_u + w(u, v)` by `decay_const`
//!   and stores the decayed value.
//! * `noisy` adds independent `N(0, noise_sigma)` noise to every candidate.
//!
//! Decayed and noisy candidates can keep improving forever, so all variants
//! stop after at most `n` steps.

use std::fmt;
use std::str::FromStr;

use narlab_graph::seed::rng_from;
use narlab_graph::WeightedGraph;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::{bellman_ford_trace, AlgoError, ExecutionTrace, Result, Snapshot, TIE_EPS};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VariantKind {
    Exact,
    Greedy,
    Decay,
    Noisy,
}

impl VariantKind {
    pub const ALL: [VariantKind; 4] =
        [VariantKind::Exact, VariantKind::Greedy, VariantKind::Decay, VariantKind::Noisy];

    pub fn name(self) -> &'static str {
        match self {
            VariantKind::Exact => "exact",
            VariantKind::Greedy => "greedy",
            VariantKind::Decay => "decay",
            VariantKind::Noisy => "noisy",
        }
    }
}

impl fmt::Display for VariantKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for VariantKind {
    type Err = AlgoError;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| AlgoError::Unknown { what: "variant", name: s.into() })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VariantSpec {
    pub kind: VariantKind,
    pub decay_const: f64,
    pub noise_sigma: f64,
    pub seed: u64,
}

impl VariantSpec {
    pub const DEFAULT_DECAY: f64 = 0.9;
    pub const DEFAULT_SIGMA: f64 = 0.05;

    pub fn new(kind: VariantKind) -> Self {
        Self { kind, decay_const: Self::DEFAULT_DECAY, noise_sigma: Self::DEFAULT_SIGMA, seed: 0 }
    }

    pub fn with_seed(self, seed: u64) -> Self {
        Self { seed, ..self }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.decay_const > 0.0 && self.decay_const <= 1.0) {
            return Err(AlgoError::InvalidVariant(format!(
                "decay_const {} outside (0, 1]",
                self.decay_const
            )));
        }
        if !(self.noise_sigma >= 0.0) {
            return Err(AlgoError::InvalidVariant(format!(
                "noise_sigma {} is negative",
                self.noise_sigma
            )));
        }
        Ok(())
    }
}

/// Trace of the chosen variant on `g`.
pub fn variant_trace(g: &WeightedGraph, spec: &VariantSpec) -> Result<ExecutionTrace> {
    spec.validate()?;
    Ok(match spec.kind {
        VariantKind::Exact => bellman_ford_trace(g),
        VariantKind::Greedy => run(g, greedy_step),
        VariantKind::Decay => {
            let c = spec.decay_const;
            run(g, |g, prev| relax_with(g, prev, |d| c * d))
        }
        VariantKind::Noisy => {
            if spec.noise_sigma == 0.0 {
                return Ok(bellman_ford_trace(g));
            }
            let normal = Normal::new(0.0, spec.noise_sigma)
                .map_err(|e| AlgoError::InvalidVariant(e.to_string()))?;
            let mut rng = rng_from(spec.seed);
            run(g, |g, prev| relax_with(g, prev, |d| d + normal.sample(&mut rng)))
        }
    })
}

fn run(g: &WeightedGraph, mut step: impl FnMut(&WeightedGraph, &Snapshot) -> Snapshot) -> ExecutionTrace {
    let mut steps = vec![Snapshot::initial(g.n(), g.source())];
    for _ in 0..g.n() {
        let next = step(g, steps.last().unwrap());
        if next == *steps.last().unwrap() {
            break;
        }
        steps.push(next);
    }
    ExecutionTrace { steps }
}

/// Synchronous relaxation where each candidate distance passes through `f`.
fn relax_with(g: &WeightedGraph, prev: &Snapshot, mut f: impl FnMut(f64) -> f64) -> Snapshot {
    let mut next = prev.clone();
    for v in (0..g.n()).filter(|&v| v != g.source()) {
        let mut best: Option<(usize, f64)> = None;
        for u in g.in_neighbors(v) {
            if !prev.reached(u) {
                continue;
            }
            let cand = f(prev.dist[u] + g.weight(u, v));
            match best {
                Some((_, b)) if cand >= b - TIE_EPS => {}
                _ => best = Some((u, cand)),
            }
        }
        if let Some((u, cand)) = best {
            if cand < prev.dist[v] - TIE_EPS {
                next.dist[v] = cand;
                next.pi[v] = u;
            }
        }
    }
    next
}

fn greedy_step(g: &WeightedGraph, prev: &Snapshot) -> Snapshot {
    let mut next = prev.clone();
    for v in (0..g.n()).filter(|&v| !prev.reached(v)) {
        let lightest = g
            .in_neighbors(v)
            .filter(|&u| prev.reached(u))
            .fold(None, |best: Option<usize>, u| match best {
                Some(b) if g.weight(b, v) <= g.weight(u, v) => Some(b),
                _ => Some(u),
            });
        if let Some(u) = lightest {
            next.dist[v] = prev.dist[u] + g.weight(u, v);
            next.pi[v] = u;
        }
    }
    next
}

#[cfg(test)]
mod tests {
    use super::*;
    use narlab_graph::{generate_er, GeneratorSpec};

    #[test]
    fn exact_and_silent_noise_match_oracle() {
        for seed in 0..20 {
            let g = generate_er(&GeneratorSpec::new(10, 0.4, seed)).unwrap();
            let exact = bellman_ford_trace(&g);
            let v = variant_trace(&g, &VariantSpec::new(VariantKind::Exact)).unwrap();
            assert_eq!(v, exact);
            let quiet = VariantSpec { noise_sigma: 0.0, ..VariantSpec::new(VariantKind::Noisy) };
            assert_eq!(variant_trace(&g, &quiet).unwrap(), exact);
        }
    }

    #[test]
    fn rejects_bad_parameters() {
        let bad = VariantSpec { decay_const: 0.0, ..VariantSpec::new(VariantKind::Decay) };
        assert!(variant_trace(&generate_er(&GeneratorSpec::new(4, 1.0, 0)).unwrap(), &bad).is_err());
        let neg = VariantSpec { noise_sigma: -1.0, ..VariantSpec::new(VariantKind::Noisy) };
        assert!(neg.validate().is_err());
        assert!("sloppy".parse::<VariantKind>().is_err());
        assert_eq!("greedy".parse::<VariantKind>().unwrap(), VariantKind::Greedy);
    }

    #[test]
    fn noisy_is_seeded() {
        let g = generate_er(&GeneratorSpec::new(16, 0.5, 3)).unwrap();
        let spec = VariantSpec::new(VariantKind::Noisy).with_seed(9);
        assert_eq!(variant_trace(&g, &spec).unwrap(), variant_trace(&g, &spec).unwrap());
    }

    #[test]
    fn decay_shortens_long_paths() {
        // two-hop path beats the direct edge only after decay
        let g = WeightedGraph::from_edges(3, 0, &[(0, 1, 0.5), (1, 2, 0.5), (0, 2, 0.95)]).unwrap();
        assert_eq!(bellman_ford_trace(&g).last().pi[2], 0);
        let spec = VariantSpec { decay_const: 0.5, ..VariantSpec::new(VariantKind::Decay) };
        let t = variant_trace(&g, &spec).unwrap();
        assert_eq!(t.last().pi[2], 1);
        assert!((t.last().dist[2] - 0.5 * (0.25 + 0.5)).abs() < 1e-12);
    }
}
