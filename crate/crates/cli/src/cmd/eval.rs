use narlab_graph::GeneratorSpec;
use narlab_training::{combine_reports, evaluate_graphs, forced_steps_eval, sample_graphs, EvalReport, TrainError};
use serde::Serialize;
use serde_json::json;

use super::{load_checkpoint, resolve_task};
use crate::args::EvalArgs;
use crate::error::{CliError, Result};
use crate::output::{OutputDir, RunManifest};

#[derive(Serialize)]
struct RunRow {
    checkpoint: String,
    run_seed: Option<u64>,
    accuracy: f64,
}

#[derive(Serialize)]
struct StepsCsv {
    checkpoint: String,
    key: i64,
    graphs: usize,
    nodes: usize,
    accuracy: f64,
}

#[derive(Serialize)]
pub(crate) struct BinCsv {
    pub p: f64,
    pub scale: f64,
    pub kind: &'static str,
    pub lo: f64,
    pub hi: f64,
    pub nodes: usize,
    pub mispredicted: usize,
    pub rate: f64,
}

#[derive(Serialize)]
pub(crate) struct PairCsv {
    pub p: f64,
    pub scale: f64,
    pub true_distance: f64,
    pub predicted_distance: f64,
}

pub(crate) fn bin_rows(r: &EvalReport, p: f64, scale: f64) -> Vec<BinCsv> {
    [("true", &r.by_true_distance), ("predicted", &r.by_predicted_distance)]
        .into_iter()
        .flat_map(|(kind, bins)| {
            bins.iter().map(move |b| BinCsv {
                p,
                scale,
                kind,
                lo: b.lo,
                hi: b.hi,
                nodes: b.nodes,
                mispredicted: b.mispredicted,
                rate: b.rate,
            })
        })
        .collect()
}

pub(crate) fn pair_rows(r: &EvalReport, p: f64, scale: f64) -> Vec<PairCsv> {
    r.distance_pairs.iter().map(|&(t, q)| PairCsv { p, scale, true_distance: t, predicted_distance: q }).collect()
}

pub(super) fn cmd_eval(args: &EvalArgs) -> Result<RunManifest> {
    let spec = GeneratorSpec::new(args.graphs.n, args.graphs.p, 0);
    let graphs = sample_graphs(&spec, args.graphs.seed, "test", args.graphs.samples)?;
    let mut out = OutputDir::create(&args.out)?;
    let (mut reports, mut runs, mut steps, mut forced) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
    let mut seeds = Vec::new();
    let mut task = None;
    for path in &args.ckpt {
        let ckpt = load_checkpoint(path)?;
        let t = resolve_task(args.task, &ckpt);
        if let Some(trained) = narlab_training::checkpoint_task(&ckpt) {
            if trained != t {
                return Err(TrainError::TaskMismatch { trained: trained.to_string(), requested: t.to_string() }.into());
            }
        }
        if task.is_some_and(|prev| prev != t) {
            return Err(CliError::Usage("all checkpoints must share one task".into()));
        }
        task = Some(t);
        let name = path.display().to_string();
        let seed = ckpt.metadata.get("seed").and_then(|s| s.as_u64());
        seeds.extend(seed);
        let report = evaluate_graphs(&ckpt.model, t, &graphs, 0)?;
        runs.push(RunRow { checkpoint: name.clone(), run_seed: seed, accuracy: report.pointer_accuracy });
        for s in &report.by_steps {
            steps.push(StepsCsv { checkpoint: name.clone(), key: s.key, graphs: s.graphs, nodes: s.nodes, accuracy: s.accuracy });
        }
        if !args.deltas.is_empty() {
            for s in forced_steps_eval(&ckpt.model, t, &graphs, &args.deltas)? {
                forced.push(StepsCsv { checkpoint: name.clone(), key: s.key, graphs: s.graphs, nodes: s.nodes, accuracy: s.accuracy });
            }
        }
        reports.push(report);
    }
    let combined = combine_reports(&reports).ok_or_else(|| CliError::Usage("no checkpoints given".into()))?;
    log::info!("pointer accuracy {:.4} +- {:.4}", combined.pointer_accuracy, combined.pointer_accuracy_std);
    out.write_json("eval.json", &combined)?;
    out.write_csv("runs.csv", &runs)?;
    out.write_csv("accuracy_vs_steps.csv", &steps)?;
    out.write_csv("mispredict_bins.csv", &bin_rows(&combined, args.graphs.p, 1.0))?;
    out.write_csv("distance_pairs.csv", &pair_rows(&combined, args.graphs.p, 1.0))?;
    if !forced.is_empty() {
        out.write_csv("forced_steps.csv", &forced)?;
    }
    let config = json!({
        "checkpoints": args.ckpt,
        "task": task,
        "n": args.graphs.n,
        "p": args.graphs.p,
        "samples": args.graphs.samples,
        "seed": args.graphs.seed,
        "deltas": args.deltas,
    });
    out.finish("eval", config, seeds)
}
