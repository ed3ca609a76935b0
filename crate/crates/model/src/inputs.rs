use std::sync::Arc;

use narlab_algorithms::Snapshot;
use narlab_graph::WeightedGraph;
use narlab_tensor::{Real, Tensor};

/// `[is_source, reached, distance]` per node.
pub const NODE_FEATURES: usize = 3;
/// `[weight, has_edge, pointer_hint, is_self]` per (receiver, sender) pair.
pub const EDGE_FEATURES: usize = 4;
/// Distance inputs and regression targets are clipped to `[0, DIST_CLIP]`.
pub const DIST_CLIP: f64 = 10.0;

/// Per-graph quantities shared by every step.
#[derive(Debug, Clone)]
pub struct GraphInputs {
    pub n: usize,
    pub source: usize,
    /// `weights[u * n + v]` for edge `u -> v`.
    pub weights: Vec<f64>,
    /// `mask[i * n + j]`: node `i` receives from `j` (edge `j -> i` or `i == j`).
    pub mask: Arc<[bool]>,
}

impl GraphInputs {
    pub fn new(g: &WeightedGraph) -> Self {
        let n = g.n();
        let mask: Vec<bool> = (0..n * n).map(|k| k / n == k % n || g.has_edge(k % n, k / n)).collect();
        Self { n, source: g.source(), weights: g.weights().to_vec(), mask: mask.into() }
    }

    /// Whether `u` is a valid predecessor candidate for `v`.
    pub fn candidate(&self, v: usize, u: usize) -> bool {
        self.mask[v * self.n + u]
    }

    pub fn node_features<F: Real>(&self, hints: &Snapshot) -> Tensor<F> {
        let mut x = Vec::with_capacity(self.n * NODE_FEATURES);
        for v in 0..self.n {
            let reached = hints.reached(v);
            let d = if reached { hints.dist[v].clamp(0.0, DIST_CLIP) } else { 0.0 };
            x.extend([F::from_f64((v == self.source) as u8 as f64), F::from_f64(reached as u8 as f64), F::from_f64(d)]);
        }
        Tensor::new(vec![self.n, NODE_FEATURES], x).expect("shape")
    }

    pub fn edge_features<F: Real>(&self, hints: &Snapshot) -> Tensor<F> {
        let n = self.n;
        let mut e = Vec::with_capacity(n * n * EDGE_FEATURES);
        for i in 0..n {
            for j in 0..n {
                let w = self.weights[j * n + i];
                e.extend([
                    F::from_f64(w),
                    F::from_f64((w != 0.0) as u8 as f64),
                    F::from_f64((hints.pi[i] == j) as u8 as f64),
                    F::from_f64((i == j) as u8 as f64),
                ]);
            }
        }
        Tensor::new(vec![n, n, EDGE_FEATURES], e).expect("shape")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn features_follow_receiver_sender_layout() {
        let g = WeightedGraph::from_edges(3, 0, &[(0, 1, 0.4), (1, 2, 0.7)]).unwrap();
        let gi = GraphInputs::new(&g);
        assert!(gi.candidate(1, 0) && gi.candidate(2, 1) && gi.candidate(2, 2));
        assert!(!gi.candidate(0, 1) && !gi.candidate(2, 0));
        let snap = Snapshot { pi: vec![0, 0, 2], dist: vec![0.0, 0.4, f64::INFINITY] };
        let x = gi.node_features::<f64>(&snap);
        assert_eq!(x.data(), &[1.0, 1.0, 0.0, 0.0, 1.0, 0.4, 0.0, 0.0, 0.0]);
        let e = gi.edge_features::<f64>(&snap);
        let at = |i: usize, j: usize| &e.data()[(i * 3 + j) * 4..(i * 3 + j + 1) * 4];
        assert_eq!(at(1, 0), &[0.4, 1.0, 1.0, 0.0]);
        assert_eq!(at(0, 1), &[0.0, 0.0, 0.0, 0.0]);
        assert_eq!(at(2, 2), &[0.0, 0.0, 1.0, 1.0]);
    }
}
