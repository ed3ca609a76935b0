use narlab_algorithms::{Task, VariantKind, VariantSpec};
use narlab_graph::{GeneratorSpec, WeightedGraph};
use narlab_latent::{
    attractor_stats, build_direction_db, cluster_projection, filter_graphs, mispredict_report, node_aggregate, per_step_pca, perturb_eval,
    record_trajectories, step_wise, trajectory_wise, value_generalisation_report, ClusterSpec, DirectionDatabase,
    PerturbMode, Selector, TrajectoryTensor,
};
use narlab_training::{pearson, sample_graphs, Executor};
use serde::Serialize;
use serde_json::{json, Value};

use super::eval::{bin_rows, pair_rows};
use super::{load_checkpoint, resolve_task};
use crate::args::{AttractorArgs, ClustersArgs, DirectionsArgs, MispredictArgs, PcaArgs, PcaMode, PerturbArgs, RecordArgs, ValgenArgs};
use crate::error::{CliError, Result};
use crate::output::{OutputDir, RunManifest};

fn graphs_json(graphs: &[WeightedGraph]) -> Result<Value> {
    Ok(Value::Array(graphs.iter().map(|g| serde_json::from_str(&g.to_json())).collect::<std::result::Result<_, _>>()?))
}

pub(super) fn cmd_record(a: &RecordArgs) -> Result<RunManifest> {
    let ckpt = load_checkpoint(&a.ckpt)?;
    let task = resolve_task(None, &ckpt);
    let spec = GeneratorSpec::new(a.n, a.p, 0);
    let (mut traj, graphs) = record_trajectories(&ckpt.model, task, &spec, a.seed, a.samples, a.t_filter, a.budget)?;
    traj.metadata["checkpoint"] = json!(a.ckpt.display().to_string());
    let mut out = OutputDir::create(&a.out)?;
    out.write("trajectories.bin", &traj.to_bytes())?;
    out.write_json("graphs.json", &graphs_json(&graphs)?)?;
    let config = json!({"checkpoint": a.ckpt, "n": a.n, "p": a.p, "samples": a.samples, "t_filter": a.t_filter, "budget": a.budget});
    out.finish("record", config, vec![a.seed])
}

fn load_traj(path: &std::path::Path) -> Result<TrajectoryTensor> {
    TrajectoryTensor::load(path).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

fn fmt(x: f64) -> String {
    x.to_string()
}

pub(super) fn cmd_pca(a: &PcaArgs) -> Result<RunManifest> {
    let traj = load_traj(&a.traj)?;
    let agg = node_aggregate(&traj, a.node_agg);
    let k = a.components;
    let mut out = OutputDir::create(&a.out)?;
    let pc_header = |first: &[&str], k: usize| -> Vec<String> {
        first.iter().map(|s| s.to_string()).chain((1..=k).map(|i| format!("pc{i}"))).collect()
    };
    let ratio_rows = |step: Option<usize>, ratios: &[f64]| -> Vec<Vec<String>> {
        let mut cum = 0.0;
        ratios
            .iter()
            .enumerate()
            .map(|(i, r)| {
                cum += r;
                let mut row = step.map(|s| vec![s.to_string()]).unwrap_or_default();
                row.extend([(i + 1).to_string(), fmt(*r), fmt(cum)]);
                row
            })
            .collect()
    };
    let ratio_header = |with_step: bool| -> Vec<String> {
        let mut h: Vec<String> = if with_step { vec!["step".into()] } else { vec![] };
        h.extend(["component", "ratio", "cumulative"].map(String::from));
        h
    };
    let mut summary = json!({});
    match a.mode {
        PcaMode::Step => {
            let (res, points) = step_wise(&agg, k)?;
            out.write_table("pca_ratios.csv", &ratio_header(false), &ratio_rows(None, &res.explained_variance_ratios))?;
            let kk = res.components.len();
            let rows: Vec<Vec<String>> = points
                .iter()
                .map(|p| [p.sample.to_string(), p.step.to_string()].into_iter().chain(p.coords.iter().map(|c| fmt(*c))).collect())
                .collect();
            out.write_table("step_coords.csv", &pc_header(&["sample", "step"], kk), &rows)?;
            summary["top_ratio_sum"] = json!(res.top_ratio_sum(k));
        }
        PcaMode::Trajectory => {
            let res = trajectory_wise(&agg, k)?;
            out.write_table("pca_ratios.csv", &ratio_header(false), &ratio_rows(None, &res.explained_variance_ratios))?;
            let kk = res.components.len();
            let dim_t = agg.dim * agg.steps;
            let rows: Vec<Vec<String>> = (0..agg.samples)
                .map(|s| {
                    let flat: Vec<f64> = (0..dim_t).map(|j| agg.get(s, j / agg.steps, j % agg.steps)).collect();
                    std::iter::once(s.to_string()).chain(res.project(&flat).into_iter().map(fmt)).collect()
                })
                .collect();
            out.write_table("trajectory_coords.csv", &pc_header(&["sample"], kk), &rows)?;
            summary["top_ratio_sum"] = json!(res.top_ratio_sum(k));
        }
        PcaMode::PerStep => {
            let per = per_step_pca(&agg, k)?;
            let rows: Vec<Vec<String>> =
                per.iter().enumerate().flat_map(|(t, r)| ratio_rows(Some(t + 1), &r.explained_variance_ratios)).collect();
            out.write_table("per_step_ratios.csv", &ratio_header(true), &rows)?;
            summary["top1_by_step"] = json!(per.iter().map(|r| r.explained_variance_ratios[0]).collect::<Vec<_>>());
        }
    }
    out.write_json("pca_summary.json", &summary)?;
    let config = json!({"traj": a.traj, "mode": format!("{:?}", a.mode).to_lowercase(), "node_agg": a.node_agg.name(), "components": k});
    out.finish("analyze pca", config, vec![])
}

pub(super) fn cmd_clusters(a: &ClustersArgs) -> Result<RunManifest> {
    let ckpt = load_checkpoint(&a.ckpt)?;
    let task = resolve_task(None, &ckpt);
    let spec = ClusterSpec {
        generator: GeneratorSpec::new(a.n, a.p, 0),
        clusters: a.clusters,
        cluster_size: a.cluster_size,
        c: a.c,
        t_filter: a.t_filter,
        budget: a.budget,
        seed: a.seed,
    };
    let proj = cluster_projection(&ckpt.model, task, &spec, a.kind, a.components)?;
    let mut out = OutputDir::create(&a.out)?;
    let k = proj.pca.components.len();
    let header: Vec<String> =
        ["cluster", "member", "step"].into_iter().map(String::from).chain((1..=k).map(|i| format!("pc{i}"))).collect();
    let rows: Vec<Vec<String>> = proj
        .points
        .iter()
        .map(|p| {
            [p.cluster, p.member, p.step].iter().map(|x| x.to_string()).chain(p.coords.iter().map(|c| fmt(*c))).collect()
        })
        .collect();
    out.write_table("cluster_coords.csv", &header, &rows)?;
    let sep_header: Vec<String> = ["step", "within", "between"].map(String::from).to_vec();
    let sep: Vec<Vec<String>> = (0..spec.t_filter)
        .map(|t| vec![(t + 1).to_string(), fmt(proj.within[t]), fmt(proj.between[t])])
        .collect();
    out.write_table("cluster_separation.csv", &sep_header, &sep)?;
    out.write_json("pca_summary.json", &json!({"explained_variance_ratios": proj.pca.explained_variance_ratios}))?;
    out.finish("analyze clusters", json!({"checkpoint": a.ckpt, "kind": a.kind, "clusters": spec, "components": k}), vec![a.seed])
}

#[derive(Serialize)]
struct DirectionRow {
    cluster: usize,
    step: usize,
    spread: f64,
    explained_ratio: f64,
}

pub(super) fn cmd_directions(a: &DirectionsArgs) -> Result<RunManifest> {
    let ckpt = load_checkpoint(&a.ckpt)?;
    let task = resolve_task(None, &ckpt);
    let spec = ClusterSpec {
        generator: GeneratorSpec::new(a.n, a.p, 0),
        clusters: a.clusters,
        cluster_size: a.cluster_size,
        c: a.c,
        t_filter: a.t_filter,
        budget: a.budget,
        seed: a.seed,
    };
    let db = build_direction_db(&ckpt.model, task, &spec)?;
    let mut out = OutputDir::create(&a.out)?;
    out.write_json("directions.json", &db)?;
    let rows: Vec<DirectionRow> = db
        .entries
        .iter()
        .map(|e| DirectionRow { cluster: e.cluster, step: e.step, spread: e.spread, explained_ratio: e.explained_ratio })
        .collect();
    out.write_csv("directions.csv", &rows)?;
    out.finish("directions", json!({"checkpoint": a.ckpt, "clusters": spec}), vec![a.seed])
}

fn parse_modes(raw: &[String]) -> Result<Vec<PerturbMode>> {
    let mut modes = Vec::new();
    for m in raw {
        match m.as_str() {
            "all" => modes.extend_from_slice(PerturbMode::ALL),
            "out" => modes.push(PerturbMode::ProjectOut),
            "onto" => modes.push(PerturbMode::ProjectOnto),
            other => modes.push(other.parse()?),
        }
    }
    Ok(modes)
}

fn parse_selectors(raw: &[String]) -> Result<Vec<Selector>> {
    let mut out = Vec::new();
    for s in raw {
        match s.as_str() {
            "all" => out.extend_from_slice(Selector::ALL),
            other => out.push(other.parse()?),
        }
    }
    Ok(out)
}

pub(super) fn cmd_perturb(a: &PerturbArgs) -> Result<RunManifest> {
    let modes = parse_modes(&a.mode)?;
    let selectors = parse_selectors(&a.selector)?;
    let ckpt = load_checkpoint(&a.ckpt)?;
    let task = resolve_task(None, &ckpt);
    let db = DirectionDatabase::load(&a.db).map_err(|e| CliError::Data(format!("{}: {e}", a.db.display())))?;
    let graphs = filter_graphs(task, &GeneratorSpec::new(a.n, a.p, 0), a.seed, a.samples, db.steps, a.budget)?;
    let mut rows = Vec::new();
    for &selector in &selectors {
        for &mode in &modes {
            let r = perturb_eval(&ckpt.model, task, &db, &graphs, mode, selector, a.sigma, a.seed)?;
            log::info!("{selector}/{mode}: {:.4}", r.accuracy);
            rows.push(r);
        }
    }
    let mut out = OutputDir::create(&a.out)?;
    out.write_csv("perturb.csv", &rows)?;
    let config = json!({"checkpoint": a.ckpt, "db": a.db, "sigma": a.sigma, "n": a.n, "p": a.p, "samples": a.samples, "t": db.steps});
    out.finish("perturb", config, vec![a.seed])
}

#[derive(Serialize)]
struct DisplacementRow {
    from_step: usize,
    to_step: usize,
    displacement: f64,
    relative_to_first: f64,
}

pub(super) fn cmd_attractor(a: &AttractorArgs) -> Result<RunManifest> {
    let traj = load_traj(&a.traj)?;
    let disp = attractor_stats(&node_aggregate(&traj, a.node_agg))?;
    let rows: Vec<DisplacementRow> = disp
        .iter()
        .enumerate()
        .map(|(i, &d)| DisplacementRow { from_step: i + 1, to_step: i + 2, displacement: d, relative_to_first: d / disp[0] })
        .collect();
    let mut out = OutputDir::create(&a.out)?;
    out.write_csv("displacements.csv", &rows)?;
    out.finish("attractor", json!({"traj": a.traj, "node_agg": a.node_agg.name()}), vec![])
}

#[derive(Serialize)]
struct AgreementRow<'a> {
    a: &'a str,
    b: &'a str,
    agreement: f64,
}

#[derive(Serialize)]
struct SplitRow {
    final_correct: bool,
    ever_correct: bool,
    nodes: usize,
    fraction: f64,
}

#[derive(Serialize)]
struct StepRow {
    sample: usize,
    step: usize,
    node: usize,
    predicted_pi: usize,
    predicted_dist: f64,
    true_pi: usize,
    true_dist: f64,
}

#[derive(Serialize)]
struct EdgeRow {
    sample: usize,
    step: usize,
    from: usize,
    to: usize,
    label: &'static str,
}

pub(super) fn cmd_mispredict(a: &MispredictArgs) -> Result<RunManifest> {
    let ckpt = load_checkpoint(&a.ckpt)?;
    let g = &a.graphs;
    let graphs = sample_graphs(&GeneratorSpec::new(g.n, g.p, 0), g.seed, "test", g.samples)?;
    let variants: Vec<VariantSpec> = VariantKind::ALL
        .iter()
        .map(|&k| VariantSpec { decay_const: a.variant_decay, noise_sigma: a.variant_sigma, ..VariantSpec::new(k) })
        .collect();
    let report = mispredict_report(&ckpt.model, &graphs, &variants, g.seed)?;
    let mut out = OutputDir::create(&a.out)?;
    let mut agree = Vec::new();
    for (i, x) in report.names.iter().enumerate() {
        for (j, y) in report.names.iter().enumerate() {
            agree.push(AgreementRow { a: x, b: y, agreement: report.agreement[i][j] });
        }
    }
    out.write_csv("agreement.csv", &agree)?;
    let split: Vec<SplitRow> = [(true, true), (true, false), (false, true), (false, false)]
        .into_iter()
        .map(|(f, e)| {
            let (r, c) = (!f as usize, !e as usize);
            SplitRow { final_correct: f, ever_correct: e, nodes: report.counts[r][c], fraction: report.matrix[r][c] }
        })
        .collect();
    out.write_csv("ever_correct.csv", &split)?;
    out.write_csv("nodes.csv", &report.nodes)?;
    if a.dump_steps {
        let (mut steps, mut edges) = (Vec::new(), Vec::new());
        for (i, graph) in graphs.iter().enumerate() {
            let truth = Task::BellmanFord.trace(graph);
            let pred = ckpt.model.execute(graph, truth.terminated_at().max(1))?;
            for (t, snap) in pred.steps.iter().enumerate().skip(1) {
                let tt = truth.at(t);
                for v in 0..graph.n() {
                    steps.push(StepRow {
                        sample: i,
                        step: t,
                        node: v,
                        predicted_pi: snap.pi[v],
                        predicted_dist: snap.dist[v],
                        true_pi: tt.pi[v],
                        true_dist: tt.dist[v],
                    });
                    let (p, q) = (snap.pi[v], truth.last().pi[v]);
                    if p == q && p != v {
                        edges.push(EdgeRow { sample: i, step: t, from: p, to: v, label: "correct" });
                        continue;
                    }
                    if q != v {
                        edges.push(EdgeRow { sample: i, step: t, from: q, to: v, label: "ground_truth_tree" });
                    }
                    if p != v {
                        edges.push(EdgeRow { sample: i, step: t, from: p, to: v, label: "wrong_tree" });
                    }
                }
            }
        }
        out.write_csv("steps.csv", &steps)?;
        out.write_csv("edges.csv", &edges)?;
        out.write_json("graphs.json", &graphs_json(&graphs)?)?;
    }
    let config = json!({
        "checkpoint": a.ckpt, "n": g.n, "p": g.p, "samples": g.samples,
        "variant_decay": a.variant_decay, "variant_sigma": a.variant_sigma, "dump_steps": a.dump_steps,
    });
    out.finish("mispredict", config, vec![g.seed])
}

#[derive(Serialize)]
struct ValgenRow {
    p: f64,
    scale: f64,
    graphs: usize,
    nodes: usize,
    accuracy: f64,
    mean_true_distance: f64,
    pearson: f64,
}

pub(super) fn cmd_valgen(a: &ValgenArgs) -> Result<RunManifest> {
    let ckpt = load_checkpoint(&a.ckpt)?;
    let task = resolve_task(None, &ckpt);
    let rows = value_generalisation_report(&ckpt.model, task, a.n, &a.p_values, a.reference_p, a.samples, a.seed, a.rescale)?;
    let mut out = OutputDir::create(&a.out)?;
    let summary: Vec<ValgenRow> = rows
        .iter()
        .map(|r| ValgenRow {
            p: r.p,
            scale: r.scale,
            graphs: r.report.graphs,
            nodes: r.report.nodes,
            accuracy: r.report.pointer_accuracy,
            mean_true_distance: r.report.mean_true_distance,
            pearson: pearson(&r.report.distance_pairs),
        })
        .collect();
    out.write_csv("valgen.csv", &summary)?;
    out.write_csv("valgen_bins.csv", &rows.iter().flat_map(|r| bin_rows(&r.report, r.p, r.scale)).collect::<Vec<_>>())?;
    out.write_csv("valgen_pairs.csv", &rows.iter().flat_map(|r| pair_rows(&r.report, r.p, r.scale)).collect::<Vec<_>>())?;
    let config = json!({
        "checkpoint": a.ckpt, "n": a.n, "p_values": a.p_values, "reference_p": a.reference_p,
        "samples": a.samples, "rescale": a.rescale,
    });
    out.finish("valgen", config, vec![a.seed])
}
