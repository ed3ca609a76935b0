use narlab_algorithms::{ExecutionTrace, Snapshot};
use narlab_graph::seed::rng_from;
use narlab_graph::WeightedGraph;
use narlab_tensor::{Real, ReduceKind, Tape, Tensor, Var};

use crate::inputs::{GraphInputs, DIST_CLIP, EDGE_FEATURES, NODE_FEATURES};
use crate::params::{Linear, ParamStore};
use crate::{Aggregator, DecayMode, ModelConfig, ModelError, Processor, Result};

#[derive(Debug, Clone)]
struct Triplet {
    node: Linear,
    left_recv: Linear,
    left_send: Linear,
    left_edge: Linear,
    right_recv: Linear,
    right_send: Linear,
    right_edge: Linear,
    out: Linear,
}

/// Parameter indices of every layer.
#[derive(Debug, Clone)]
struct Layout {
    enc_node: Linear,
    enc_latent: Linear,
    msg_recv: Linear,
    msg_send: Linear,
    msg_edge: Linear,
    msg_out: Option<Linear>,
    triplet: Option<Triplet>,
    upd_self: Linear,
    upd_agg: Linear,
    upd_out: Option<Linear>,
    ptr_q: Linear,
    ptr_k: Linear,
    ptr_edge: Linear,
    ptr_out: Linear,
    dist: Linear,
}

impl Layout {
    fn build<F: Real>(cfg: &ModelConfig, store: &mut ParamStore<F>, seed: u64) -> Self {
        let mut rng = rng_from(seed);
        let rng = &mut rng;
        let d = cfg.latent_dim;
        let linear = cfg.processor == Processor::LinearPgn;
        let h = if linear { d } else { cfg.message_hidden };
        let enc_node = store.linear("encoder.node", NODE_FEATURES, d, true, rng);
        let enc_latent = store.linear("encoder.latent", d, d, false, rng);
        let msg_recv = store.linear("message.recv", d, h, true, rng);
        let msg_send = store.linear("message.send", d, h, false, rng);
        let msg_edge = store.linear("message.edge", EDGE_FEATURES, h, false, rng);
        let msg_out = (!linear).then(|| store.linear("message.out", h, d, true, rng));
        let triplet = (cfg.processor == Processor::TripletLite).then(|| {
            let c = cfg.triplet_channels;
            Triplet {
                node: store.linear("triplet.node", d, c, true, rng),
                left_recv: store.linear("triplet.left_recv", d, c, false, rng),
                left_send: store.linear("triplet.left_send", d, c, false, rng),
                left_edge: store.linear("triplet.left_edge", EDGE_FEATURES, c, false, rng),
                right_recv: store.linear("triplet.right_recv", d, c, false, rng),
                right_send: store.linear("triplet.right_send", d, c, false, rng),
                right_edge: store.linear("triplet.right_edge", EDGE_FEATURES, c, false, rng),
                out: store.linear("triplet.out", c, h, false, rng),
            }
        });
        let upd_self = store.linear("update.self", d, d, true, rng);
        let upd_agg = store.linear("update.agg", d, d, false, rng);
        let upd_out = matches!(cfg.processor, Processor::Mpnn | Processor::TripletLite)
            .then(|| store.linear("update.out", d, d, true, rng));
        let p = cfg.pointer_hidden;
        Self {
            enc_node,
            enc_latent,
            msg_recv,
            msg_send,
            msg_edge,
            msg_out,
            triplet,
            upd_self,
            upd_agg,
            upd_out,
            ptr_q: store.linear("pointer.query", d, p, true, rng),
            ptr_k: store.linear("pointer.key", d, p, false, rng),
            ptr_edge: store.linear("pointer.edge", EDGE_FEATURES, p, false, rng),
            ptr_out: store.linear("pointer.out", p, 1, true, rng),
            dist: store.linear("distance", d, 1, true, rng),
        }
    }
}

/// Per-node running sum of latents for decay towards the mean.
#[derive(Debug, Clone, Copy, Default)]
pub struct DecayState {
    pub sum: Option<Var>,
    pub count: usize,
}

/// Scales `z` towards zero (`z <- c z`) or towards the per-node mean of the
/// latents seen so far in this execution, including `z` itself
/// (`z <- mu + c (z - mu)`).
pub fn apply_decay<F: Real>(
    tape: &mut Tape<F>,
    z: Var,
    c: f64,
    mode: DecayMode,
    state: &mut DecayState,
) -> Result<Var> {
    match mode {
        DecayMode::ToZero => Ok(if c == 1.0 { z } else { tape.scale(z, F::from_f64(c)) }),
        DecayMode::ToMean => {
            let sum = match state.sum {
                Some(s) => tape.add(s, z)?,
                None => z,
            };
            state.sum = Some(sum);
            state.count += 1;
            if c == 1.0 {
                return Ok(z);
            }
            let mu = tape.scale(sum, F::from_f64(1.0 / state.count as f64));
            let dev = tape.sub(z, mu)?;
            let dev = tape.scale(dev, F::from_f64(c));
            Ok(tape.add(mu, dev)?)
        }
    }
}

/// How hint inputs are chosen at each step.
#[derive(Debug, Clone, Copy)]
pub enum Feed<'a> {
    /// Ground-truth snapshot `t - 1` is the input of step `t`.
    TeacherForced(&'a ExecutionTrace),
    /// The model's own previous prediction is the input.
    SelfRollout,
}

/// Predicted hints and latents of one execution.
#[derive(Debug, Clone)]
pub struct Rollout<F> {
    /// Snapshot 0 is the initial state; snapshot `t` is the prediction of step `t`.
    pub trace: ExecutionTrace,
    /// Latent `[n, D]` after each step, post decay and post hook.
    pub latents: Vec<Tensor<F>>,
}

/// Outputs of the decoders for one step.
#[derive(Debug, Clone, Copy)]
pub struct Decoded {
    /// `[n, n]`; row `v` scores candidate predecessors `u`.
    pub pointer_logits: Var,
    /// `[n]`.
    pub dist: Var,
}

/// Encode-process-decode network with parameters of precision `F`.
#[derive(Debug, Clone)]
pub struct Model<F: Real> {
    config: ModelConfig,
    params: ParamStore<F>,
    layout: Layout,
}

impl<F: Real> Model<F> {
    /// Freshly initialised model; weights are drawn from `seed`.
    pub fn new(config: ModelConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut params = ParamStore::default();
        let layout = Layout::build(&config, &mut params, seed);
        Ok(Self { config, params, layout })
    }

    /// Rebuilds a model from stored parameters, checking names and shapes.
    pub fn from_params(config: ModelConfig, params: ParamStore<F>) -> Result<Self> {
        let reference = Self::new(config, 0)?;
        if reference.params.names() != params.names() {
            return Err(ModelError::Checkpoint("parameter names do not match the configuration".into()));
        }
        for (name, (a, b)) in params.names().iter().zip(reference.params.tensors().iter().zip(params.tensors())) {
            if a.shape() != b.shape() {
                return Err(ModelError::Checkpoint(format!(
                    "parameter {name}: expected {:?}, got {:?}",
                    a.shape(),
                    b.shape()
                )));
            }
        }
        Ok(Self { params, ..reference })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn params(&self) -> &ParamStore<F> {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParamStore<F> {
        &mut self.params
    }

    pub fn cast<G: Real>(&self) -> Model<G> {
        Model { config: self.config.clone(), params: self.params.cast(), layout: self.layout.clone() }
    }

    fn reduce_kind(&self) -> ReduceKind {
        match self.config.aggregator {
            Aggregator::Max => ReduceKind::Max,
            Aggregator::Mean => ReduceKind::Mean,
            Aggregator::Sum => ReduceKind::Sum,
            Aggregator::Softmax => ReduceKind::Softmax { temperature: self.config.softmax_temperature },
        }
    }

    /// Processor input `x W_x + z_prev W_z + b` from node features and the previous latent.
    pub fn encode(
        &self,
        tape: &mut Tape<F>,
        pv: &[Var],
        gi: &GraphInputs,
        hints: &Snapshot,
        z_prev: Var,
    ) -> Result<Var> {
        let x = tape.constant(gi.node_features(hints));
        let a = self.layout.enc_node.apply(tape, pv, x)?;
        let b = self.layout.enc_latent.apply(tape, pv, z_prev)?;
        Ok(tape.add(a, b)?)
    }

    /// One message-passing step from the encoded input `h` to the next latent.
    pub fn process_step(
        &self,
        tape: &mut Tape<F>,
        pv: &[Var],
        gi: &GraphInputs,
        edges: Var,
        h: Var,
    ) -> Result<Var> {
        let l = &self.layout;
        let recv = l.msg_recv.apply(tape, pv, h)?;
        let send = l.msg_send.apply(tape, pv, h)?;
        let pair = tape.pairwise(recv, send)?;
        let edge = l.msg_edge.apply(tape, pv, edges)?;
        let mut pre = tape.add(pair, edge)?;
        if let Some(t) = &l.triplet {
            let node = t.node.apply(tape, pv, h)?;
            let left = self.pair_features(tape, pv, h, edges, t.left_recv, t.left_send, t.left_edge)?;
            let right = self.pair_features(tape, pv, h, edges, t.right_recv, t.right_send, t.right_edge)?;
            let tri = tape.triplet_max(node, left, right, Some(&gi.mask))?;
            let tri = t.out.apply(tape, pv, tri)?;
            pre = tape.add(pre, tri)?;
        }
        let msg = match l.msg_out {
            Some(out) => {
                let act = tape.relu(pre);
                out.apply(tape, pv, act)?
            }
            None => pre,
        };
        let agg = tape.reduce(msg, 1, self.reduce_kind(), Some(gi.mask.clone()))?;
        let a = l.upd_self.apply(tape, pv, h)?;
        let b = l.upd_agg.apply(tape, pv, agg)?;
        let upd = tape.add(a, b)?;
        Ok(match (self.config.processor, l.upd_out) {
            (Processor::LinearPgn, _) => upd,
            (_, Some(out)) => {
                let act = tape.relu(upd);
                out.apply(tape, pv, act)?
            }
            (_, None) => tape.relu(upd),
        })
    }

    #[allow(clippy::too_many_arguments)]
    fn pair_features(
        &self,
        tape: &mut Tape<F>,
        pv: &[Var],
        h: Var,
        edges: Var,
        recv: Linear,
        send: Linear,
        edge: Linear,
    ) -> Result<Var> {
        let r = recv.apply(tape, pv, h)?;
        let s = send.apply(tape, pv, h)?;
        let p = tape.pairwise(r, s)?;
        let e = edge.apply(tape, pv, edges)?;
        Ok(tape.add(p, e)?)
    }

    /// Pointer scores over every (node, candidate) pair and per-node distances.
    pub fn decode(&self, tape: &mut Tape<F>, pv: &[Var], gi: &GraphInputs, edges: Var, z: Var) -> Result<Decoded> {
        let l = &self.layout;
        let n = gi.n;
        let q = l.ptr_q.apply(tape, pv, z)?;
        let k = l.ptr_k.apply(tape, pv, z)?;
        let pair = tape.pairwise(q, k)?;
        let e = l.ptr_edge.apply(tape, pv, edges)?;
        let s = tape.add(pair, e)?;
        let s = tape.relu(s);
        let logits = l.ptr_out.apply(tape, pv, s)?;
        let pointer_logits = tape.reshape(logits, &[n, n])?;
        let d = l.dist.apply(tape, pv, z)?;
        let dist = tape.reshape(d, &[n])?;
        Ok(Decoded { pointer_logits, dist })
    }

    /// Encode, process and decay for one step. Returns the new latent.
    pub fn step(
        &self,
        tape: &mut Tape<F>,
        pv: &[Var],
        gi: &GraphInputs,
        hints: &Snapshot,
        z_prev: Var,
        decay: &mut DecayState,
    ) -> Result<(Var, Var)> {
        let edges = tape.constant(gi.edge_features(hints));
        let h = self.encode(tape, pv, gi, hints, z_prev)?;
        let z = self.process_step(tape, pv, gi, edges, h)?;
        let z = if self.config.decays() {
            apply_decay(tape, z, self.config.decay_factor, self.config.decay_mode, decay)?
        } else {
            z
        };
        Ok((z, edges))
    }

    /// Teacher-forced training loss on one graph: per step pointer
    /// cross-entropy plus distance MSE, plus the output pointer loss on the
    /// final step.
    pub fn loss(&self, tape: &mut Tape<F>, pv: &[Var], g: &WeightedGraph, trace: &ExecutionTrace) -> Result<Var> {
        self.loss_with(tape, pv, g, trace, &mut |_| false)
    }

    /// As [`loss`](Self::loss), but step `t` takes the model's own
    /// (non-differentiated) prediction of step `t - 1` as hint input when
    /// `own_hints(t)` is true. Step 1 always sees the initial state.
    pub fn loss_with(
        &self,
        tape: &mut Tape<F>,
        pv: &[Var],
        g: &WeightedGraph,
        trace: &ExecutionTrace,
        own_hints: &mut dyn FnMut(usize) -> bool,
    ) -> Result<Var> {
        let gi = GraphInputs::new(g);
        let n = gi.n;
        let steps = trace.terminated_at().max(1);
        let mut z = tape.constant(Tensor::zeros(&[n, self.config.latent_dim]));
        let mut decay = DecayState::default();
        let mut total: Option<Var> = None;
        let mut last_logits = None;
        let mut predicted: Option<Snapshot> = None;
        for t in 1..=steps {
            let hints = match predicted.take() {
                Some(p) if t > 1 && own_hints(t) => p,
                _ => trace.at(t - 1).clone(),
            };
            let (z_next, edges) = self.step(tape, pv, &gi, &hints, z, &mut decay)?;
            z = z_next;
            let out = self.decode(tape, pv, &gi, edges, z)?;
            predicted = Some(self.predict(&gi, tape.value(out.pointer_logits), tape.value(out.dist)));
            let target = trace.at(t);
            let ce = tape.cross_entropy(out.pointer_logits, n, &target.pi, &gi.mask)?;
            let finite: Vec<bool> = target.dist.iter().map(|d| d.is_finite()).collect();
            let goal: Vec<F> = target.dist.iter().map(|&d| F::from_f64(if d.is_finite() { d.clamp(0.0, DIST_CLIP) } else { 0.0 })).collect();
            let mse = tape.mse(out.dist, &goal, &finite)?;
            let step_loss = tape.add(ce, mse)?;
            total = Some(match total {
                Some(acc) => tape.add(acc, step_loss)?,
                None => step_loss,
            });
            last_logits = Some(out.pointer_logits);
        }
        let final_ce = tape.cross_entropy(last_logits.expect("at least one step"), n, &trace.last().pi, &gi.mask)?;
        Ok(tape.add(total.expect("at least one step"), final_ce)?)
    }

    /// Runs `steps` steps on `g`; see [`run_with`](Self::run_with).
    pub fn run(&self, g: &WeightedGraph, steps: usize, feed: Feed<'_>) -> Result<Rollout<F>> {
        self.run_with(g, steps, feed, &mut |_, _| {})
    }

    /// Runs `steps` steps, calling `hook(t, z)` on the latent of step `t`
    /// (1-based) before it is decoded and carried to the next step.
    pub fn run_with(
        &self,
        g: &WeightedGraph,
        steps: usize,
        feed: Feed<'_>,
        hook: &mut dyn FnMut(usize, &mut Tensor<F>),
    ) -> Result<Rollout<F>> {
        if steps == 0 {
            return Err(ModelError::Config("a run needs at least one step".into()));
        }
        if let Feed::TeacherForced(trace) = feed {
            if trace.n() != g.n() {
                return Err(ModelError::Input(format!("trace has {} nodes, graph {}", trace.n(), g.n())));
            }
        }
        let gi = GraphInputs::new(g);
        let n = gi.n;
        let mut snaps = vec![Snapshot::initial(n, gi.source)];
        let mut latents = Vec::with_capacity(steps);
        let mut z = Tensor::zeros(&[n, self.config.latent_dim]);
        let mut mean_sum: Option<Tensor<F>> = None;
        let mut count = 0;
        for t in 1..=steps {
            let mut tape = Tape::new();
            let pv = self.params.register(&mut tape, false);
            let hints = match feed {
                Feed::TeacherForced(trace) => trace.at(t - 1).clone(),
                Feed::SelfRollout => snaps[t - 1].clone(),
            };
            let z_prev = tape.constant(z);
            let mut decay = DecayState { sum: mean_sum.take().map(|s| tape.constant(s)), count };
            let (z_var, edges) = self.step(&mut tape, &pv, &gi, &hints, z_prev, &mut decay)?;
            mean_sum = decay.sum.map(|s| tape.value(s).clone());
            count = decay.count;
            let mut z_new = tape.value(z_var).clone();
            hook(t, &mut z_new);
            if !z_new.all_finite() {
                return Err(ModelError::NonFinite(format!("latent at step {t}")));
            }
            let z_leaf = tape.constant(z_new.clone());
            let out = self.decode(&mut tape, &pv, &gi, edges, z_leaf)?;
            snaps.push(self.predict(&gi, tape.value(out.pointer_logits), tape.value(out.dist)));
            latents.push(z_new.clone());
            z = z_new;
        }
        Ok(Rollout { trace: ExecutionTrace { steps: snaps }, latents })
    }

    /// Argmax pointers (lowest index on ties) over valid candidates; a node is
    /// reached when it points away from itself or is the source.
    fn predict(&self, gi: &GraphInputs, logits: &Tensor<F>, dist: &Tensor<F>) -> Snapshot {
        let n = gi.n;
        let (l, d) = (logits.data(), dist.data());
        let mut pi = Vec::with_capacity(n);
        let mut out = Vec::with_capacity(n);
        for v in 0..n {
            let mut best: Option<(usize, F)> = None;
            for u in (0..n).filter(|&u| gi.candidate(v, u)) {
                let s = l[v * n + u];
                if best.is_none_or(|(_, b)| s > b) {
                    best = Some((u, s));
                }
            }
            let p = best.map_or(v, |(u, _)| u);
            pi.push(p);
            let reached = p != v || v == gi.source;
            out.push(if reached { d[v].as_f64() } else { f64::INFINITY });
        }
        Snapshot { pi, dist: out }
    }
}
