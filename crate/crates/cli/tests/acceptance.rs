//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if a criterion outside `EXPECTED_RED` fails.
//!
//! Trained models are cached under the cargo test tmp dir, keyed by a hash of
//! their training config, so only the first run pays for training.

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use narlab_algorithms::{bellman_ford_trace, Task, VariantKind};
use narlab_graph::seed::rng_from;
use narlab_graph::{generate_er, reweight, scale_weights, GeneratorSpec, NodePotential, WeightedGraph};
use narlab_latent::{
    attractor_stats, build_direction_db, cluster_projection, default_variants, find_clusters, filter_graphs, mispredict_report, node_aggregate,
    per_step_pca, perturb_eval, record_graphs, step_wise, trajectory_wise, value_generalisation_report, ClusterSpec,
    ClusterKind, NodeAgg, PerturbMode, Selector,
};
use narlab_model::handset::handset_bellman_ford;
use narlab_model::{Aggregator, Checkpoint, Feed, ModelConfig, Processor};
use narlab_tensor::{ReduceKind, Tape, Tensor, Var};
use narlab_training::{evaluate, forced_steps_eval, mean_std, sample_graphs, train_run, TrainConfig};
use rand::seq::SliceRandom;
use rand::Rng;
use sha2::{Digest, Sha256};

const EXPECTED_RED: &[&str] = &["P4", "P11", "P12", "P14", "P15"];

const EXACT_TOL: f64 = 1e-9;
const P1_SECONDS: f64 = 10.0;
const P4_RATIO: f64 = 4.0;
const P4_PUBLISHED: [(f64, f64); 2] = [(0.5, 0.15), (0.25, 1.1)];
const P4_REL: f64 = 0.5;
const P4_SECONDS: f64 = 60.0;
const P5_REL: f64 = 1e-4;
const P6_MAX_TOL: f64 = 1e-6;
const P6_MEAN_TOL: f64 = 1e-3;
const P7_TOL: f64 = 1e-6;
const P8_ACC: f64 = 0.85;
const P8_SECONDS: f64 = 1800.0;
const P9_SLACK: f64 = 0.01;
const P10_STEP_TOP3: f64 = 0.85;
const P11_TOP1: f64 = 0.95;
const P12_RATIO: f64 = 0.1;
const P13_UPPER_RIGHT: usize = 0;
const P14_MEAN_OUT: f64 = 0.3;
const P15_DROP: f64 = 0.03;
const P15_RESTORE: f64 = 0.02;

const SEEDS: [u64; 3] = [0, 1, 2];
const EVAL_SEED: u64 = 2024;
const EVAL_SAMPLES: usize = 64;
const TRAIN_N: usize = 16;
const EVAL_N: usize = 64;

struct Outcome {
    id: &'static str,
    pass: bool,
}

fn report(out: &mut Vec<Outcome>, id: &'static str, pass: bool, detail: String) {
    println!("{id} {} {detail}", if pass { "PASS" } else { "FAIL" });
    out.push(Outcome { id, pass });
}

// ---------------------------------------------------------------- exact checks

fn p1() -> (bool, String) {
    let start = Instant::now();
    let mut rng = rng_from(101);
    let (mut worst, mut pi_ok) = (0.0f64, true);
    for i in 0..1000u64 {
        let n = rng.random_range(3..=16);
        let c = rng.random_range(0.05..0.45);
        let g = generate_er(&GeneratorSpec::new(n, 0.5, 10_000 + i).with_weight_range(c, 1.0 - c)).unwrap();
        let h = NodePotential::sample(n, c, &mut rng);
        let r = reweight(&g, &h, true).unwrap();
        let (a, b) = (bellman_ford_trace(&g), bellman_ford_trace(&r));
        pi_ok &= a.steps.len() == b.steps.len();
        let s = g.source();
        for (sa, sb) in a.steps.iter().zip(&b.steps) {
            pi_ok &= sa.pi == sb.pi;
            for u in 0..n {
                if sa.reached(u) {
                    worst = worst.max((sb.dist[u] - (sa.dist[u] + h.h[s] - h.h[u])).abs());
                } else {
                    pi_ok &= !sb.reached(u);
                }
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    (pi_ok && worst <= EXACT_TOL && secs < P1_SECONDS, format!("traces_identical={pi_ok} max_dist_err={worst:.2e} seconds={secs:.2}"))
}

fn p2() -> (bool, String) {
    let mut rng = rng_from(102);
    let (mut worst, mut pi_ok) = (0.0f64, true);
    for i in 0..100u64 {
        let g = generate_er(&GeneratorSpec::new(rng.random_range(3..=20), 0.5, 20_000 + i)).unwrap();
        let lambda = loop {
            let l = rng.random_range(0.5..1.0);
            if l > 0.5 {
                break l;
            }
        };
        let (a, b) = (bellman_ford_trace(&g), bellman_ford_trace(&scale_weights(&g, lambda).unwrap()));
        pi_ok &= a.steps.len() == b.steps.len();
        for (sa, sb) in a.steps.iter().zip(&b.steps) {
            pi_ok &= sa.pi == sb.pi;
            for (da, db) in sa.dist.iter().zip(&sb.dist) {
                if da.is_finite() {
                    worst = worst.max((lambda * da - db).abs());
                } else {
                    pi_ok &= db.is_infinite();
                }
            }
        }
    }
    (pi_ok && worst <= EXACT_TOL, format!("pointers_invariant={pi_ok} max_dist_err={worst:.2e}"))
}

/// Shortest distances by enumerating every simple path from the source.
fn path_enumeration(g: &WeightedGraph) -> Vec<f64> {
    fn walk(g: &WeightedGraph, u: usize, len: f64, seen: &mut [bool], best: &mut [f64]) {
        best[u] = best[u].min(len);
        for v in 0..g.n() {
            if g.has_edge(u, v) && !seen[v] {
                seen[v] = true;
                walk(g, v, len + g.weight(u, v), seen, best);
                seen[v] = false;
            }
        }
    }
    let mut best = vec![f64::INFINITY; g.n()];
    let mut seen = vec![false; g.n()];
    seen[g.source()] = true;
    walk(g, g.source(), 0.0, &mut seen, &mut best);
    best
}

fn p3() -> (bool, String) {
    let (mut checked, mut drawn, mut worst) = (0, 0u64, 0.0f64);
    while checked < 200 {
        let n = 2 + (drawn % 7) as usize;
        let g = generate_er(&GeneratorSpec::new(n, 0.5, 30_000 + drawn)).unwrap();
        drawn += 1;
        let expected = path_enumeration(&g);
        if expected.iter().any(|d| d.is_infinite()) {
            continue;
        }
        let got = bellman_ford_trace(&g);
        for (a, b) in got.last().dist.iter().zip(&expected) {
            worst = worst.max((a - b).abs());
        }
        checked += 1;
    }
    (worst <= EXACT_TOL, format!("connected_graphs={checked} drawn={drawn} max_err={worst:.2e}"))
}

/// Mean over ordered reachable pairs `u != v` of all-pairs shortest distance.
fn mean_pair_distance(g: &WeightedGraph) -> (f64, usize) {
    let n = g.n();
    let mut d: Vec<f64> = (0..n * n)
        .map(|k| if k / n == k % n { 0.0 } else if g.has_edge(k / n, k % n) { g.weight(k / n, k % n) } else { f64::INFINITY })
        .collect();
    for k in 0..n {
        for i in 0..n {
            for j in 0..n {
                let via = d[i * n + k] + d[k * n + j];
                if via < d[i * n + j] {
                    d[i * n + j] = via;
                }
            }
        }
    }
    let pairs: Vec<f64> = (0..n * n).filter(|&k| k / n != k % n && d[k].is_finite()).map(|k| d[k]).collect();
    (pairs.iter().sum(), pairs.len())
}

fn p4() -> (bool, String) {
    let start = Instant::now();
    let means: Vec<f64> = P4_PUBLISHED
        .iter()
        .map(|&(p, _)| {
            let (mut sum, mut count) = (0.0, 0);
            for i in 0..50u64 {
                let (s, c) = mean_pair_distance(&generate_er(&GeneratorSpec::new(EVAL_N, p, 40_000 + i)).unwrap());
                sum += s;
                count += c;
            }
            sum / count as f64
        })
        .collect();
    let ratio = means[1] / means[0];
    let within: Vec<bool> =
        P4_PUBLISHED.iter().zip(&means).map(|(&(_, want), &m)| (m - want).abs() <= P4_REL * want).collect();
    let secs = start.elapsed().as_secs_f64();
    let pass = ratio >= P4_RATIO && within.iter().all(|&w| w) && secs < P4_SECONDS;
    (
        pass,
        format!(
            "n={EVAL_N} mean(p=0.5)={:.4} mean(p=0.25)={:.4} ratio={ratio:.2} (need >= {P4_RATIO}) within_50pct={within:?} seconds={secs:.2}",
            means[0], means[1]
        ),
    )
}

type Build = dyn Fn(&mut Tape<f64>, &[Var]) -> Var;

fn random(shape: &[usize], rng: &mut impl Rng) -> Tensor<f64> {
    let n = shape.iter().product();
    Tensor::new(shape.to_vec(), (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap()
}

fn project(tape: &mut Tape<f64>, out: Var, seed: u64) -> Var {
    let shape = tape.value(out).shape().to_vec();
    let w = tape.constant(random(&shape, &mut rng_from(seed)));
    let p = tape.mul(out, w).unwrap();
    tape.sum(p)
}

/// Largest relative error between tape gradients and central differences.
fn grad_error(inputs: Vec<Tensor<f64>>, build: &Build) -> f64 {
    let value = |xs: &[Tensor<f64>]| {
        let mut tape = Tape::new();
        let vars: Vec<_> = xs.iter().map(|t| tape.leaf(t.clone(), false)).collect();
        let out = build(&mut tape, &vars);
        tape.value(out).item()
    };
    let mut tape = Tape::new();
    let vars: Vec<_> = inputs.iter().map(|t| tape.leaf(t.clone(), true)).collect();
    let out = build(&mut tape, &vars);
    let grads = tape.backward(out).unwrap();
    let h = 1e-6;
    let mut worst = 0.0f64;
    for (i, input) in inputs.iter().enumerate() {
        let analytic = grads.get(vars[i]).unwrap();
        for j in 0..input.len() {
            let (mut plus, mut minus) = (inputs.clone(), inputs.clone());
            plus[i].data_mut()[j] += h;
            minus[i].data_mut()[j] -= h;
            let numeric = (value(&plus) - value(&minus)) / (2.0 * h);
            let a = analytic.data()[j];
            worst = worst.max((a - numeric).abs() / a.abs().max(numeric.abs()).max(1.0));
        }
    }
    worst
}

fn p5() -> (bool, String) {
    let mut rng = rng_from(105);
    let mut r = |shape: &[usize]| random(shape, &mut rng);
    let mask: std::sync::Arc<[bool]> = (0..12).map(|k| k % 5 != 2 && k < 8).collect::<Vec<_>>().into();
    let tri_mask: Vec<bool> = (0..16).map(|k| k / 4 == k % 4 || k % 3 != 0).collect();
    let ce_mask: Vec<bool> = (0..12).map(|k| k % 4 != 3).collect();
    let target: Vec<f64> = (0..12).map(|k| k as f64 / 7.0).collect();
    let mut cases: Vec<(&str, Vec<Tensor<f64>>, Box<Build>)> = vec![
        ("matmul", vec![r(&[2, 3, 4]), r(&[4, 2])], Box::new(|t, v| {
            let y = t.matmul(v[0], v[1]).unwrap();
            project(t, y, 1)
        })),
        ("add_bias", vec![r(&[3, 4]), r(&[4])], Box::new(|t, v| {
            let y = t.add_bias(v[0], v[1]).unwrap();
            project(t, y, 2)
        })),
        ("affine+relu", vec![r(&[4, 3]), r(&[3, 5]), r(&[5])], Box::new(|t, v| {
            let y = t.affine(v[0], v[1], v[2]).unwrap();
            let y = t.relu(y);
            project(t, y, 3)
        })),
        ("add/sub/mul/scale", vec![r(&[3, 2]), r(&[3, 2])], Box::new(|t, v| {
            let a = t.add(v[0], v[1]).unwrap();
            let s = t.sub(a, v[1]).unwrap();
            let m = t.mul(s, v[1]).unwrap();
            let k = t.scale(m, -1.7);
            project(t, k, 4)
        })),
        ("concat/reshape/pairwise", vec![r(&[3, 2]), r(&[3, 4]), r(&[5, 6])], Box::new(|t, v| {
            let c = t.concat(&[v[0], v[1]]).unwrap();
            let p = t.pairwise(c, v[2]).unwrap();
            let y = t.reshape(p, &[15, 6]).unwrap();
            project(t, y, 5)
        })),
        ("softmax_weighted_sum", vec![r(&[5, 3])], Box::new(|t, v| {
            let y = t.softmax_weighted_sum(v[0], 0, 0.4).unwrap();
            project(t, y, 6)
        })),
        ("reduce_max", vec![r(&[4, 3])], Box::new(|t, v| {
            let y = t.reduce_max(v[0], 1).unwrap();
            project(t, y, 7)
        })),
        ("triplet_max", vec![r(&[4, 3]), r(&[4, 4, 3]), r(&[4, 4, 3])], Box::new(|t, v| {
            let y = t.triplet_max(v[0], v[1], v[2], None).unwrap();
            project(t, y, 8)
        })),
        ("triplet_max masked", vec![r(&[4, 2]), r(&[4, 4, 2]), r(&[4, 4, 2])], Box::new(move |t, v| {
            let y = t.triplet_max(v[0], v[1], v[2], Some(&tri_mask)).unwrap();
            project(t, y, 9)
        })),
        ("cross_entropy", vec![r(&[3, 4])], Box::new(move |t, v| t.cross_entropy(v[0], 4, &[0, 2, 1], &ce_mask).unwrap())),
        ("mse", vec![r(&[3, 4])], Box::new(move |t, v| {
            let m: Vec<bool> = (0..12).map(|k| k != 5).collect();
            t.mse(v[0], &target, &m).unwrap()
        })),
    ];
    let kinds = [ReduceKind::Max, ReduceKind::Sum, ReduceKind::Mean, ReduceKind::Softmax { temperature: 0.5 }];
    for kind in kinds {
        for axis in 0..3 {
            cases.push(("reduce", vec![r(&[3, 4, 2])], Box::new(move |t, v| {
                let y = t.reduce(v[0], axis, kind, None).unwrap();
                project(t, y, 10)
            })));
        }
        let m = mask.clone();
        cases.push(("reduce masked", vec![r(&[3, 4, 2])], Box::new(move |t, v| {
            let y = t.reduce(v[0], 1, kind, Some(m.clone())).unwrap();
            project(t, y, 11)
        })));
    }
    let mut worst = (0.0f64, "");
    for (name, inputs, build) in &cases {
        let e = grad_error(inputs.clone(), build.as_ref());
        if e >= worst.0 {
            worst = (e, name);
        }
    }
    (worst.0 <= P5_REL, format!("checks={} max_rel_err={:.2e} ({})", cases.len(), worst.0, worst.1))
}

fn p6() -> (bool, String) {
    let mut rng = rng_from(106);
    let (mut max_err, mut mean_err) = (0.0f64, 0.0f64);
    for _ in 0..200 {
        let k = rng.random_range(2..=16);
        let mut levels: Vec<f64> = (0..40).map(|i| -2.0 + 0.1 * i as f64).collect();
        levels.shuffle(&mut rng);
        let values: Vec<f64> = levels[..k].iter().map(|x| x + rng.random_range(-0.02..0.02)).collect();
        let mut sorted = values.clone();
        sorted.sort_by(|a, b| b.partial_cmp(a).unwrap());
        if sorted[0] - sorted[1] < 0.1 {
            continue;
        }
        let mut tape = Tape::<f64>::new();
        let x = tape.constant(Tensor::from_f64(&[k], &values).unwrap());
        let cold = tape.softmax_weighted_sum(x, 0, 1e-4).unwrap();
        let hot = tape.softmax_weighted_sum(x, 0, 1e4).unwrap();
        let mean = values.iter().sum::<f64>() / k as f64;
        max_err = max_err.max((tape.value(cold).item() - sorted[0]).abs());
        mean_err = mean_err.max((tape.value(hot).item() - mean).abs());
    }
    (
        max_err <= P6_MAX_TOL && mean_err <= P6_MEAN_TOL,
        format!("T=1e-4 vs max err={max_err:.2e} T=1e4 vs mean err={mean_err:.2e}"),
    )
}

fn p7() -> (bool, String) {
    let model = handset_bellman_ford::<f64>(4);
    let (mut worst, mut pi_ok) = (0.0f64, true);
    for i in 0..10u64 {
        let g = generate_er(&GeneratorSpec::new(4, 0.6, 70_000 + i)).unwrap();
        let oracle = bellman_ford_trace(&g);
        let steps = oracle.terminated_at().max(1);
        let run = model.run(&g, steps, Feed::SelfRollout).unwrap();
        for t in 1..=steps {
            let truth = oracle.at(t);
            pi_ok &= run.trace.steps[t].pi == truth.pi;
            for v in (0..4).filter(|&v| truth.reached(v)) {
                worst = worst.max((run.latents[t - 1].data()[v * 4] - truth.dist[v]).abs());
            }
        }
    }
    (pi_ok && worst <= P7_TOL, format!("pointers_match={pi_ok} max_dist_err={worst:.2e}"))
}

// ---------------------------------------------------------------- trained models

fn base_model() -> ModelConfig {
    ModelConfig { latent_dim: 64, message_hidden: 64, ..Default::default() }
}

fn train_config(model: ModelConfig) -> TrainConfig {
    let mut cfg = TrainConfig { model, steps: 5000, batch_size: 32, lr: 1e-3, own_hint_prob: 0.5, log_every: 500, ..Default::default() };
    cfg.train = GeneratorSpec::new(TRAIN_N, 0.5, 0);
    cfg.eval = GeneratorSpec::new(EVAL_N, 0.5, 0);
    cfg
}

struct Trained {
    ckpt: Checkpoint,
    seconds: f64,
}

fn trained(cfg: &TrainConfig, seed: u64) -> Trained {
    let key = hex::encode(Sha256::digest(format!("{}|{seed}", serde_json::to_string(cfg).unwrap())));
    let dir = PathBuf::from(env!("CARGO_TARGET_TMPDIR")).join("acceptance-models");
    fs::create_dir_all(&dir).unwrap();
    let path = dir.join(format!("{}.bin", &key[..16]));
    if let Ok(ckpt) = Checkpoint::load(&path) {
        let seconds = ckpt.metadata["train_seconds"].as_f64().unwrap_or(f64::NAN);
        return Trained { ckpt, seconds };
    }
    eprintln!("training {} / {} seed {seed} ...", cfg.model.processor, cfg.model.aggregator);
    let mut outcome = train_run(cfg, seed, &mut |row| eprintln!("  step {} loss {:.4}", row.step, row.train_loss)).unwrap();
    outcome.checkpoint.metadata["train_seconds"] = outcome.seconds.into();
    outcome.checkpoint.save(&path).unwrap();
    Trained { ckpt: outcome.checkpoint, seconds: outcome.seconds }
}

fn accuracy(ckpt: &Checkpoint) -> f64 {
    evaluate(ckpt, Task::BellmanFord, &GeneratorSpec::new(EVAL_N, 0.5, 0), EVAL_SEED, EVAL_SAMPLES).unwrap().pointer_accuracy
}

/// Most frequent oracle step count of graphs drawn from `spec`.
fn typical_t(spec: &GeneratorSpec) -> usize {
    let graphs = sample_graphs(spec, EVAL_SEED, "t-census", 500).unwrap();
    let mut counts = std::collections::BTreeMap::new();
    for g in &graphs {
        *counts.entry(bellman_ford_trace(g).terminated_at()).or_insert(0) += 1;
    }
    counts.into_iter().max_by_key(|&(t, c)| (c, t)).unwrap().0
}

fn main() -> ExitCode {
    let mut out = Vec::new();
    for (id, f) in [("P1", p1 as fn() -> (bool, String)), ("P2", p2), ("P3", p3), ("P4", p4), ("P5", p5), ("P6", p6), ("P7", p7)] {
        let (pass, detail) = f();
        report(&mut out, id, pass, detail);
    }

    let mpnn = train_config(base_model());
    let softmax = train_config(ModelConfig { aggregator: Aggregator::Softmax, softmax_temperature: 0.01, ..base_model() });
    let linear = train_config(ModelConfig { processor: Processor::LinearPgn, ..base_model() });

    let base: Vec<Trained> = SEEDS.iter().map(|&s| trained(&mpnn, s)).collect();
    let base_acc: Vec<f64> = base.iter().map(|t| accuracy(&t.ckpt)).collect();
    let (base_mean, base_std) = mean_std(&base_acc);
    let slowest = base.iter().map(|t| t.seconds).fold(0.0, f64::max);
    report(
        &mut out,
        "P8",
        base_mean >= P8_ACC && slowest <= P8_SECONDS,
        format!("mpnn n={EVAL_N} acc={base_mean:.4}±{base_std:.4} runs={base_acc:.4?} slowest_train_s={slowest:.0}"),
    );

    let soft_acc: Vec<f64> = SEEDS.iter().map(|&s| accuracy(&trained(&softmax, s).ckpt)).collect();
    let (soft_mean, soft_std) = mean_std(&soft_acc);
    report(
        &mut out,
        "P9",
        soft_mean >= base_mean - P9_SLACK,
        format!("softmax(T=0.01) acc={soft_mean:.4}±{soft_std:.4} vs max {base_mean:.4} runs={soft_acc:.4?}"),
    );

    let model = &base[0].ckpt.model;
    let task = Task::BellmanFord;
    let eval_spec = GeneratorSpec::new(EVAL_N, 0.5, 0);
    let t = typical_t(&eval_spec);
    let graphs = filter_graphs(task, &eval_spec, EVAL_SEED, 64, t, 100_000).unwrap();
    let traj = record_graphs(model, &graphs, t, serde_json::Value::Null).unwrap();
    let agg = node_aggregate(&traj, NodeAgg::Max);
    let step_top3 = step_wise(&agg, 3).unwrap().0.top_ratio_sum(3);
    let traj_top3 = trajectory_wise(&agg, 3).unwrap().top_ratio_sum(3);
    report(
        &mut out,
        "P10",
        step_top3 >= P10_STEP_TOP3 && step_top3 > traj_top3,
        format!("n={EVAL_N} N=64 T={t} step-wise top3={step_top3:.4} trajectory-wise top3={traj_top3:.4}"),
    );

    let scale_spec = ClusterSpec { generator: eval_spec, clusters: 8, cluster_size: 32, c: 0.5, t_filter: t, budget: 100_000, seed: EVAL_SEED };
    let mut cluster_min = Vec::new();
    for members in find_clusters(task, &scale_spec, ClusterKind::Scale).unwrap() {
        let a = node_aggregate(&record_graphs(model, &members, t, serde_json::Value::Null).unwrap(), NodeAgg::Max);
        let top1 = per_step_pca(&a, 1).unwrap().iter().map(|r| r.explained_variance_ratios[0]).fold(1.0, f64::min);
        cluster_min.push(top1);
    }
    let (p11_mean, _) = mean_std(&cluster_min);
    report(
        &mut out,
        "P11",
        p11_mean >= P11_TOP1,
        format!("n={EVAL_N} T={t} 8 clusters x 32, mean over clusters of min-over-steps top1={p11_mean:.4} per_cluster={cluster_min:.3?}"),
    );

    // Reweighting clusters draw base weights from (c, 1 - c), which shortens executions.
    let train_spec = GeneratorSpec::new(TRAIN_N, 0.5, 0);
    let c = 0.25;
    let t_cluster = typical_t(&train_spec.with_weight_range(c, 1.0 - c));
    let cluster_spec = |clusters| ClusterSpec {
        generator: train_spec,
        clusters,
        cluster_size: 8,
        c,
        t_filter: t_cluster,
        budget: 100_000,
        seed: EVAL_SEED,
    };
    let sep = cluster_projection(model, task, &cluster_spec(10), ClusterKind::Reweight, 3).unwrap();
    let separated = sep.within.iter().zip(&sep.between).all(|(w, b)| w < b);
    println!(
        "cluster-separation {} n={TRAIN_N} c={c} T={t_cluster} within={:.4?} between={:.4?}",
        if separated { "PASS" } else { "FAIL" },
        sep.within,
        sep.between
    );

    let disp = attractor_stats(&agg).unwrap();
    let disp_ratio = disp[disp.len() - 1] / disp[0];
    let eval_graphs = sample_graphs(&eval_spec, EVAL_SEED, "test", EVAL_SAMPLES).unwrap();
    let mut ordered = 0;
    let mut forced = Vec::new();
    for run in &base {
        let rows = forced_steps_eval(&run.ckpt.model, task, &eval_graphs, &[-2, 0, 2]).unwrap();
        let (m2, z, p2) = (rows[0].accuracy, rows[1].accuracy, rows[2].accuracy);
        ordered += (m2 < p2 && p2 < z) as usize;
        forced.push(format!("[-2:{m2:.3} 0:{z:.3} +2:{p2:.3}]"));
    }
    report(
        &mut out,
        "P12",
        disp_ratio <= P12_RATIO && ordered >= 2,
        format!("n={EVAL_N} T={t} displacements={disp:.4?} last/first={disp_ratio:.4} forced={} ordered_seeds={ordered}/3", forced.join(" ")),
    );

    let mis = mispredict_report(model, &eval_graphs, &default_variants(), EVAL_SEED).unwrap();
    let exact = mis.model_agreement(VariantKind::Exact.name()).unwrap();
    let others: Vec<(String, f64)> = VariantKind::ALL
        .iter()
        .map(|k| (k.name().to_string(), mis.model_agreement(k.name()).unwrap()))
        .collect();
    let exact_is_max = others.iter().all(|(_, a)| *a <= exact);
    report(
        &mut out,
        "P13",
        mis.counts[0][1] == P13_UPPER_RIGHT && exact_is_max,
        format!("final&never={} agreement={others:.4?}", mis.counts[0][1]),
    );

    let db = build_direction_db(model, task, &cluster_spec(100)).unwrap();
    let pgraphs = filter_graphs(task, &train_spec, EVAL_SEED + 1, 64, t_cluster, 100_000).unwrap();
    let acc = |mode, selector| perturb_eval(model, task, &db, &pgraphs, mode, selector, None, EVAL_SEED).unwrap().accuracy;
    let l2 = Selector::L2Closest;
    let (nf, rnd, dir) = (acc(PerturbMode::NoiseFree, l2), acc(PerturbMode::Random, l2), acc(PerturbMode::Directional, l2));
    let (onto, outp) = (acc(PerturbMode::ProjectOnto, l2), acc(PerturbMode::ProjectOut, l2));
    let mean_out = acc(PerturbMode::ProjectOut, Selector::Mean);
    report(
        &mut out,
        "P14",
        nf >= rnd && rnd >= dir && onto > outp && mean_out < P14_MEAN_OUT,
        format!(
            "n={TRAIN_N} c={c} T={t_cluster} noise_free={nf:.4} random={rnd:.4} directional={dir:.4} l2 onto={onto:.4} out={outp:.4} mean out={mean_out:.4}"
        ),
    );

    let lin = trained(&linear, SEEDS[0]);
    let rows = value_generalisation_report(&lin.ckpt.model, task, EVAL_N, &[0.5, 0.25], 0.5, EVAL_SAMPLES, EVAL_SEED, true).unwrap();
    let (a50, a25, a25s) = (rows[0].report.pointer_accuracy, rows[1].report.pointer_accuracy, rows[2].report.pointer_accuracy);
    report(
        &mut out,
        "P15",
        a50 - a25 >= P15_DROP && (a25s - a50).abs() <= P15_RESTORE,
        format!("linear_pgn p=0.5 {a50:.4} p=0.25 {a25:.4} p=0.25 rescaled(x{:.3}) {a25s:.4}", rows[2].scale),
    );

    let red: Vec<&str> = out.iter().filter(|o| !o.pass).map(|o| o.id).collect();
    let unexpected: Vec<&&str> = red.iter().filter(|id| !EXPECTED_RED.contains(id)).collect();
    println!("acceptance: {}/{} PASS; red={red:?} expected_red={EXPECTED_RED:?}", out.len() - red.len(), out.len());
    if unexpected.is_empty() {
        ExitCode::SUCCESS
    } else {
        println!("unexpected FAIL: {unexpected:?}");
        ExitCode::FAILURE
    }
}
