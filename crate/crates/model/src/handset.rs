//! Hand-constructed linear PGN weights that run Bellman-Ford exactly.
//!
//! Channel 0 of the latent carries the distance estimate. Each step encodes
//! `d + BIG * (1 - reached)`, sends `-(d_j + w(j, i))` along every edge (the
//! self-message uses weight 0), takes the max and negates it, so channel 0
//! becomes `min(d_i, min_j d_j + w(j, i))`. Channel 1 keeps the encoded
//! distance of the previous step, and the pointer head scores candidate `u`
//! for node `v` by `POINTER_OFFSET - d_u - w(u, v)` on it, with a tiny penalty
//! on the self candidate so that a node keeps its existing predecessor when
//! nothing improves. `latent_dim` must be at least 2.

use narlab_tensor::Real;

use crate::{Aggregator, Model, ModelConfig, Processor};

/// Encoded distance of an unreached node.
pub const BIG: f64 = 100.0;
pub const POINTER_OFFSET: f64 = 1000.0;
pub const SELF_PENALTY: f64 = 1e-7;

pub fn handset_bellman_ford<F: Real>(latent_dim: usize) -> Model<F> {
    assert!(latent_dim >= 2, "hand-set weights use two latent channels");
    let cfg = ModelConfig {
        latent_dim,
        processor: Processor::LinearPgn,
        aggregator: Aggregator::Max,
        pointer_hidden: 1,
        ..Default::default()
    };
    let mut model = Model::<F>::new(cfg, 0).expect("valid config");
    let params = model.params_mut();
    for t in params.tensors_mut() {
        t.data_mut().iter_mut().for_each(|x| *x = F::zero());
    }
    let d = latent_dim;
    let mut set = |name: &str, index: usize, value: f64| {
        params.get_mut(name).unwrap_or_else(|| panic!("no parameter {name}")).data_mut()[index] = F::from_f64(value);
    };
    // node features are [is_source, reached, d]
    set("encoder.node.w", d, -BIG);
    set("encoder.node.w", 2 * d, 1.0);
    set("encoder.node.b", 0, BIG);
    set("message.send.w", 0, -1.0);
    // edge features are [w, has_edge, pointer_hint, is_self]
    set("message.edge.w", 0, -1.0);
    set("update.agg.w", 0, -1.0);
    set("update.self.w", 1, 1.0);
    set("pointer.query.b", 0, POINTER_OFFSET);
    set("pointer.key.w", 1, -1.0);
    set("pointer.edge.w", 0, -1.0);
    set("pointer.edge.w", 3, -SELF_PENALTY);
    set("pointer.out.w", 0, 1.0);
    set("distance.w", 0, 1.0);
    model
}
