use narlab_graph::seed::{item_seed, stream_seed};
use narlab_graph::{generate_er, GeneratorSpec, WeightedGraph};

use crate::Result;

/// Graph `index` of the stream `name` derived from `master`.
pub fn sample_graph(spec: &GeneratorSpec, master: u64, name: &str, index: u64) -> Result<WeightedGraph> {
    Ok(generate_er(&spec.with_seed(item_seed(stream_seed(master, name), index)))?)
}

/// The first `count` graphs of a stream.
pub fn sample_graphs(spec: &GeneratorSpec, master: u64, name: &str, count: usize) -> Result<Vec<WeightedGraph>> {
    (0..count as u64).map(|i| sample_graph(spec, master, name, i)).collect()
}

/// Endless reproducible sequence of graphs.
#[derive(Debug, Clone)]
pub struct GraphStream {
    spec: GeneratorSpec,
    stream: u64,
    next: u64,
}

impl GraphStream {
    pub fn new(spec: GeneratorSpec, master: u64, name: &str) -> Self {
        Self { spec, stream: stream_seed(master, name), next: 0 }
    }

    pub fn position(&self) -> u64 {
        self.next
    }
}

impl Iterator for GraphStream {
    type Item = Result<(u64, WeightedGraph)>;

    fn next(&mut self) -> Option<Self::Item> {
        let index = self.next;
        self.next += 1;
        Some(generate_er(&self.spec.with_seed(item_seed(self.stream, index))).map(|g| (index, g)).map_err(Into::into))
    }
}
