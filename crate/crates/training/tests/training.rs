use narlab_algorithms::Task;
use narlab_graph::GeneratorSpec;
use narlab_model::{Feed, ModelConfig};
use narlab_training::*;

fn small_config(steps: usize) -> TrainConfig {
    TrainConfig {
        model: ModelConfig { latent_dim: 32, message_hidden: 32, pointer_hidden: 16, ..Default::default() },
        train: GeneratorSpec::new(8, 0.5, 0),
        eval: GeneratorSpec::new(16, 0.5, 0),
        batch_size: 4,
        steps,
        log_every: 10,
        ..Default::default()
    }
}

#[test]
fn zero_steps_gives_initial_model_near_chance() {
    let cfg = small_config(0);
    let out = train_run(&cfg, 3, &mut |_| {}).unwrap();
    assert!(out.metrics.is_empty());
    let graphs = sample_graphs(&cfg.eval, 3, "test", 20).unwrap();
    let report = evaluate_graphs(&out.checkpoint.model, Task::BellmanFord, &graphs, 0).unwrap();
    // Chance is roughly one over the candidate count (about n/2 + 1 here).
    assert!(report.pointer_accuracy < 0.5, "{}", report.pointer_accuracy);
}

#[test]
fn overfits_a_single_graph() {
    let mut cfg = small_config(500);
    cfg.train_pool = Some(1);
    cfg.batch_size = 1;
    cfg.lr = 3e-3;
    let out = train_run(&cfg, 11, &mut |_| {}).unwrap();
    let graphs = sample_graphs(&cfg.train, 11, narlab_graph::seed::DATAGEN, 1).unwrap();
    let report = evaluate_graphs(&out.checkpoint.model, Task::BellmanFord, &graphs, 0).unwrap();
    assert!(report.pointer_accuracy >= 0.99, "{}", report.pointer_accuracy);
}

#[test]
fn training_is_reproducible() {
    let cfg = small_config(20);
    let a = train_run(&cfg, 5, &mut |_| {}).unwrap();
    let b = train_run(&cfg, 5, &mut |_| {}).unwrap();
    assert_eq!(a.metrics, b.metrics);
    assert_eq!(a.checkpoint.to_bytes(), b.checkpoint.to_bytes());
    let c = train_run(&cfg, 6, &mut |_| {}).unwrap();
    assert_ne!(a.checkpoint.to_bytes(), c.checkpoint.to_bytes());
}

#[test]
fn metrics_rows_and_loss_decrease() {
    let mut cfg = small_config(60);
    cfg.eval_every = 30;
    cfg.eval_samples = 4;
    cfg.seeds = vec![1, 2];
    let mut seen = Vec::new();
    let outs = train(&cfg, &mut |r| seen.push(r.clone())).unwrap();
    assert_eq!(outs.len(), 2);
    assert_eq!(seen.len(), 12);
    assert_eq!(seen.iter().map(|r| r.step).take(6).collect::<Vec<_>>(), vec![10, 20, 30, 40, 50, 60]);
    assert!(seen[2].eval_acc.is_some() && seen[1].eval_acc.is_none());
    assert!(seen.iter().all(|r| r.eval_acc.is_none_or(|a| (0.0..=1.0).contains(&a))));
    for out in &outs {
        assert!(out.metrics.last().unwrap().train_loss < out.metrics[0].train_loss);
        assert_eq!(out.checkpoint.metadata["task"], "bellman_ford");
    }
}

#[test]
fn invalid_configs_are_rejected() {
    let mut cfg = small_config(1);
    cfg.batch_size = 0;
    assert!(matches!(train_run(&cfg, 0, &mut |_| {}), Err(TrainError::Config(_))));
    let mut cfg = small_config(1);
    cfg.seeds.clear();
    assert!(train(&cfg, &mut |_| {}).is_err());
    let mut cfg = small_config(1);
    cfg.train_pool = Some(0);
    assert!(train_run(&cfg, 0, &mut |_| {}).is_err());
}

#[test]
fn divergence_is_reported() {
    let mut cfg = small_config(50);
    cfg.lr = 1e30;
    assert!(matches!(train_run(&cfg, 0, &mut |_| {}), Err(TrainError::Diverged { .. })));
}

#[test]
fn oracle_executor_scores_perfectly() {
    let graphs = sample_graphs(&GeneratorSpec::new(12, 0.3, 0), 9, "test", 30).unwrap();
    let oracle = OracleExecutor(Task::BellmanFord);
    let report = evaluate_graphs(&oracle, Task::BellmanFord, &graphs, 0).unwrap();
    assert_eq!(report.pointer_accuracy, 1.0);
    assert_eq!(report.nodes, 360);
    assert!(report.by_steps.iter().all(|r| r.accuracy == 1.0));
    assert!(report.by_true_distance.iter().all(|b| b.nodes == 0 || b.rate == 0.0));
    assert!(report.distance_pairs.iter().all(|(a, b)| a == b));
    assert!((pearson(&report.distance_pairs) - 1.0).abs() < 1e-12);
    // Bins are contiguous from zero and cover every reachable node.
    let max_d = report.distance_pairs.iter().map(|p| p.0).fold(0.0, f64::max);
    let bins = &report.by_true_distance;
    assert_eq!(bins[0].lo, 0.0);
    assert!(bins.last().unwrap().hi > max_d && bins.last().unwrap().lo <= max_d);
    assert_eq!(bins.iter().map(|b| b.nodes).sum::<usize>(), report.distance_pairs.len());

    // Stopping early loses accuracy on graphs that need several steps.
    let rows = forced_steps_eval(&oracle, Task::BellmanFord, &graphs, &[-2, 0, 2]).unwrap();
    assert!(rows[0].accuracy < 1.0 && rows[0].graphs <= 30);
    assert_eq!(rows[1].accuracy, 1.0);
    assert_eq!(rows[2].accuracy, 1.0);
    assert_eq!(rows[1].graphs, 30);
}

#[test]
fn forced_steps_skip_too_short_budgets() {
    let graphs = sample_graphs(&GeneratorSpec::new(8, 0.5, 0), 2, "test", 10).unwrap();
    let oracle = OracleExecutor(Task::BellmanFord);
    let rows = forced_steps_eval(&oracle, Task::BellmanFord, &graphs, &[-100]).unwrap();
    assert_eq!(rows[0].graphs, 0);
    assert!(rows[0].accuracy.is_nan());
}

#[test]
fn accuracy_vs_steps_groups_by_termination() {
    let graphs = sample_graphs(&GeneratorSpec::new(10, 0.4, 0), 4, "test", 25).unwrap();
    let rows = accuracy_vs_steps(&OracleExecutor(Task::BellmanFord), Task::BellmanFord, &graphs).unwrap();
    assert_eq!(rows.iter().map(|r| r.graphs).sum::<usize>(), 25);
    for r in &rows {
        let expected = graphs.iter().filter(|g| Task::BellmanFord.trace(g).terminated_at().max(1) as i64 == r.key).count();
        assert_eq!(r.graphs, expected);
    }
    // One graph gives one row.
    assert_eq!(accuracy_vs_steps(&OracleExecutor(Task::BellmanFord), Task::BellmanFord, &graphs[..1]).unwrap().len(), 1);
}

#[test]
fn forced_delta_zero_matches_evaluate() {
    let cfg = small_config(30);
    let out = train_run(&cfg, 8, &mut |_| {}).unwrap();
    let graphs = sample_graphs(&cfg.eval, 8, "test", 6).unwrap();
    let model = &out.checkpoint.model;
    let report = evaluate_graphs(model, Task::BellmanFord, &graphs, 0).unwrap();
    let rows = forced_steps_eval(model, Task::BellmanFord, &graphs, &[0]).unwrap();
    assert_eq!(rows[0].accuracy, report.pointer_accuracy);
    let via_ckpt = evaluate(&out.checkpoint, Task::BellmanFord, &cfg.eval, 8, 6).unwrap();
    assert_eq!(via_ckpt, report);
}

#[test]
fn evaluation_rejects_task_mismatch() {
    let out = train_run(&small_config(0), 0, &mut |_| {}).unwrap();
    let err = evaluate(&out.checkpoint, Task::Bfs, &GeneratorSpec::new(8, 0.5, 0), 0, 2).unwrap_err();
    assert!(matches!(err, TrainError::TaskMismatch { .. }));
}

#[test]
fn self_rollout_ignores_oracle_hints() {
    let out = train_run(&small_config(10), 0, &mut |_| {}).unwrap();
    let graphs = sample_graphs(&GeneratorSpec::new(10, 0.5, 0), 1, "test", 2).unwrap();
    let model = &out.checkpoint.model;
    let steps = 4;
    let base = model.run(&graphs[0], steps, Feed::SelfRollout).unwrap();
    let same = model.run(&graphs[0], steps, Feed::SelfRollout).unwrap();
    assert_eq!(base.trace, same.trace);
    let via_exec = Executor::execute(model, &graphs[0], steps).unwrap();
    assert_eq!(via_exec, base.trace);
}

#[test]
fn combined_reports_average_runs() {
    let graphs = sample_graphs(&GeneratorSpec::new(8, 0.5, 0), 0, "test", 5).unwrap();
    let oracle = OracleExecutor(Task::BellmanFord);
    let a = evaluate_graphs(&oracle, Task::BellmanFord, &graphs, 0).unwrap();
    let mut b = a.clone();
    b.pointer_accuracy = 0.5;
    b.run_accuracies = vec![0.5];
    let c = combine_reports(&[a.clone(), b]).unwrap();
    assert_eq!(c.pointer_accuracy, 0.75);
    assert!((c.pointer_accuracy_std - 0.5f64.sqrt() * 0.5).abs() < 1e-12);
    assert_eq!(c.nodes, 2 * a.nodes);
    assert_eq!(c.distance_pairs.len(), 2 * a.distance_pairs.len());
    assert!(combine_reports(&[]).is_none());
}
