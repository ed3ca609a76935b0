use serde::Deserialize;
use std::fmt::Write as _;

use crate::{GraphError, Result};

/// Dense directed graph with a distinguished source node.
///
/// `weights[u * n + v]` is the weight of edge `u -> v`; `0.0` means no edge.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedGraph {
    n: usize,
    weights: Vec<f64>,
    source: usize,
}

impl WeightedGraph {
    /// Builds a graph from a row-major `n * n` weight matrix, checking every invariant.
    pub fn new(n: usize, weights: Vec<f64>, source: usize) -> Result<Self> {
        if n < 2 {
            return Err(GraphError::TooFewNodes(n));
        }
        if weights.len() != n * n {
            return Err(GraphError::Malformed(format!(
                "expected {} weights, got {}",
                n * n,
                weights.len()
            )));
        }
        if source >= n {
            return Err(GraphError::Malformed(format!("source {source} out of range for n={n}")));
        }
        for u in 0..n {
            for v in 0..n {
                let w = weights[u * n + v];
                if u == v && w != 0.0 {
                    return Err(GraphError::Malformed(format!("self-edge on node {u}")));
                }
                if w != 0.0 && !(w > 0.0 && w < 1.0) {
                    return Err(GraphError::WeightOutOfRange { u, v, weight: w });
                }
            }
        }
        Ok(Self { n, weights, source })
    }

    /// Builds a graph from directed `(u, v, w)` triples.
    pub fn from_edges(n: usize, source: usize, edges: &[(usize, usize, f64)]) -> Result<Self> {
        if n < 2 {
            return Err(GraphError::TooFewNodes(n));
        }
        let mut weights = vec![0.0; n * n];
        for &(u, v, w) in edges {
            if u >= n || v >= n {
                return Err(GraphError::Malformed(format!("edge ({u}, {v}) out of range")));
            }
            weights[u * n + v] = w;
        }
        Self::new(n, weights, source)
    }

    /// Same as [`from_edges`](Self::from_edges) but inserts both directions of every edge.
    pub fn from_undirected_edges(
        n: usize,
        source: usize,
        edges: &[(usize, usize, f64)],
    ) -> Result<Self> {
        let both: Vec<_> = edges
            .iter()
            .flat_map(|&(u, v, w)| [(u, v, w), (v, u, w)])
            .collect();
        Self::from_edges(n, source, &both)
    }

    pub(crate) fn from_parts_unchecked(n: usize, weights: Vec<f64>, source: usize) -> Self {
        debug_assert_eq!(weights.len(), n * n);
        Self { n, weights, source }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn source(&self) -> usize {
        self.source
    }

    /// Row-major weight matrix.
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    #[inline]
    pub fn weight(&self, u: usize, v: usize) -> f64 {
        self.weights[u * self.n + v]
    }

    #[inline]
    pub fn has_edge(&self, u: usize, v: usize) -> bool {
        self.weights[u * self.n + v] != 0.0
    }

    /// Nodes `u` with an edge `u -> v`, in index order.
    pub fn in_neighbors(&self, v: usize) -> impl Iterator<Item = usize> + '_ {
        (0..self.n).filter(move |&u| self.has_edge(u, v))
    }

    pub fn out_degree(&self, u: usize) -> usize {
        (0..self.n).filter(|&v| self.has_edge(u, v)).count()
    }

    pub fn edge_count(&self) -> usize {
        self.weights.iter().filter(|&&w| w != 0.0).count()
    }

    /// Directed edges `(u, v, w)` in row-major order.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        let n = self.n;
        self.weights
            .iter()
            .enumerate()
            .filter(|(_, &w)| w != 0.0)
            .map(move |(i, &w)| (i / n, i % n, w))
    }

    pub fn is_symmetric(&self) -> bool {
        (0..self.n).all(|u| (0..u).all(|v| self.weight(u, v) == self.weight(v, u)))
    }

    pub fn with_source(&self, source: usize) -> Result<Self> {
        Self::new(self.n, self.weights.clone(), source)
    }

    /// Largest edge weight, 0 for an edgeless graph.
    pub fn max_weight(&self) -> f64 {
        self.weights.iter().copied().fold(0.0, f64::max)
    }

    /// Serialises as `{"n", "source", "edges": [[u, v, w], ...]}` with weights at
    /// 17 significant digits, which round-trips every `f64` exactly.
    pub fn to_json(&self) -> String {
        let mut out = format!("{{\"n\":{},\"source\":{},\"edges\":[", self.n, self.source);
        for (i, (u, v, w)) in self.edges().enumerate() {
            if i > 0 {
                out.push(',');
            }
            write!(out, "[{u},{v},{w:.16e}]").expect("string write");
        }
        out.push_str("]}");
        out
    }

    pub fn from_json(text: &str) -> Result<Self> {
        #[derive(Deserialize)]
        struct Raw {
            n: usize,
            source: usize,
            edges: Vec<(usize, usize, f64)>,
        }
        let raw: Raw = serde_json::from_str(text)?;
        Self::from_edges(raw.n, raw.source, &raw.edges)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_inputs() {
        assert!(matches!(WeightedGraph::new(1, vec![0.0], 0), Err(GraphError::TooFewNodes(1))));
        assert!(WeightedGraph::from_edges(3, 0, &[(0, 0, 0.5)]).is_err());
        assert!(WeightedGraph::from_edges(3, 0, &[(0, 1, 1.0)]).is_err());
        assert!(WeightedGraph::from_edges(3, 0, &[(0, 1, -0.2)]).is_err());
        assert!(WeightedGraph::from_edges(3, 3, &[(0, 1, 0.2)]).is_err());
        assert!(WeightedGraph::from_edges(3, 0, &[(0, 5, 0.2)]).is_err());
    }

    #[test]
    fn neighbors_and_symmetry() {
        let g = WeightedGraph::from_undirected_edges(4, 0, &[(0, 1, 0.3), (1, 2, 0.7)]).unwrap();
        assert!(g.is_symmetric());
        assert_eq!(g.in_neighbors(1).collect::<Vec<_>>(), vec![0, 2]);
        assert_eq!(g.out_degree(3), 0);
        assert_eq!(g.edge_count(), 4);
        let d = WeightedGraph::from_edges(3, 0, &[(0, 1, 0.3)]).unwrap();
        assert!(!d.is_symmetric());
    }

    #[test]
    fn json_round_trip_is_exact() {
        let w = 0.1 + 0.2; // not representable in short decimal form
        let g = WeightedGraph::from_edges(3, 2, &[(0, 1, w), (2, 1, 1.0 / 3.0)]).unwrap();
        let text = g.to_json();
        assert!(text.contains("3.0000000000000004e-1"), "{text}");
        let back = WeightedGraph::from_json(&text).unwrap();
        assert_eq!(back, g);
    }
}
