use narlab_graph::WeightedGraph;

use crate::{ExecutionTrace, Snapshot};

/// Parallel breadth-first search: each step discovers every unreached node
/// with an edge from the previous frontier. Weights only matter as adjacency;
/// `dist` is the hop count and `pi` the lowest-index discoverer.
pub fn bfs_trace(g: &WeightedGraph) -> ExecutionTrace {
    let n = g.n();
    let mut steps = vec![Snapshot::initial(n, g.source())];
    loop {
        let prev = steps.last().unwrap();
        let mut next = prev.clone();
        for v in (0..n).filter(|&v| !prev.reached(v)) {
            if let Some(u) = g.in_neighbors(v).find(|&u| prev.reached(u)) {
                next.dist[v] = prev.dist[u] + 1.0;
                next.pi[v] = u;
            }
        }
        if next == *prev {
            break;
        }
        steps.push(next);
    }
    ExecutionTrace { steps }
}
