use narlab_graph::WeightedGraph;

use crate::{ExecutionTrace, Snapshot};

/// Margin a candidate must beat the current distance by to count as an
/// improvement; candidates within it of the best are treated as tied and the
/// lowest index wins. Keeps traces stable under floating-point reassociation
/// (e.g. reweighted copies of a graph with exactly tied paths).
pub const TIE_EPS: f64 = 1e-12;

/// One synchronous relaxation step: every edge reads the previous snapshot.
pub fn relax_step(g: &WeightedGraph, prev: &Snapshot) -> Snapshot {
    let n = g.n();
    let mut next = prev.clone();
    for v in 0..n {
        let mut best: Option<(usize, f64)> = None;
        for u in g.in_neighbors(v) {
            let du = prev.dist[u];
            if !du.is_finite() {
                continue;
            }
            let cand = du + g.weight(u, v);
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

/// Runs Bellman-Ford to its fixed point, recording the state after every step.
pub fn bellman_ford_trace(g: &WeightedGraph) -> ExecutionTrace {
    let mut steps = vec![Snapshot::initial(g.n(), g.source())];
    // Non-negative weights converge within n - 1 steps; the bound is a guard.
    for _ in 0..g.n() {
        let next = relax_step(g, steps.last().unwrap());
        if next == *steps.last().unwrap() {
            break;
        }
        steps.push(next);
    }
    ExecutionTrace { steps }
}

#[cfg(test)]
mod tests {
    use super::*;
    use narlab_graph::{generate_er, GeneratorSpec};

    #[test]
    fn single_edge() {
        let g = WeightedGraph::from_edges(2, 0, &[(0, 1, 0.3)]).unwrap();
        let t = bellman_ford_trace(&g);
        assert_eq!(t.terminated_at(), 1);
        assert_eq!(t.steps[1].dist, vec![0.0, 0.3]);
        assert_eq!(t.steps[1].pi, vec![0, 0]);
        assert_eq!(relax_step(&g, t.last()), *t.last());
    }

    #[test]
    fn three_node_example() {
        let g = WeightedGraph::from_edges(3, 0, &[(0, 1, 0.5), (1, 2, 0.2), (0, 2, 0.9)]).unwrap();
        let t = bellman_ford_trace(&g);
        let last = t.last();
        assert_eq!(last.pi, vec![0, 0, 1]);
        assert!((last.dist[2] - 0.7).abs() < 1e-12);
        assert_eq!(last.dist[1], 0.5);
        // step 1 takes the direct edge, step 2 improves through node 1
        assert_eq!(t.steps[1].pi, vec![0, 0, 0]);
        assert_eq!(t.terminated_at(), 2);
    }

    #[test]
    fn isolated_node_stays_unreached() {
        let g = WeightedGraph::from_undirected_edges(3, 0, &[(0, 1, 0.4)]).unwrap();
        for s in &bellman_ford_trace(&g).steps {
            assert!(s.dist[2].is_infinite());
            assert_eq!(s.pi[2], 2);
        }
    }

    #[test]
    fn monotone_and_fixed_point_on_random_graphs() {
        for seed in 0..50 {
            let g = generate_er(&GeneratorSpec::new(12, 0.3, seed)).unwrap();
            let t = bellman_ford_trace(&g);
            assert!(t.terminated_at() <= g.n() - 1);
            for w in t.steps.windows(2) {
                assert!(w[0].dist.iter().zip(&w[1].dist).all(|(a, b)| b <= a));
            }
            assert_eq!(relax_step(&g, t.last()), *t.last());
        }
    }
}
