use std::fmt::Display;
use std::path::PathBuf;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand, ValueEnum};
use narlab_algorithms::Task;
use narlab_latent::{ClusterKind, NodeAgg};
use narlab_model::{Aggregator, DecayMode, Processor};

fn parse<T: FromStr>(s: &str) -> Result<T, String>
where
    T::Err: Display,
{
    s.parse().map_err(|e: T::Err| e.to_string())
}

#[derive(Debug, Parser)]
#[command(name = "narlab", version, about = "Train neural algorithmic reasoners and probe their latent space")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train one model per seed and write checkpoints plus a metrics CSV.
    Train(TrainArgs),
    /// Evaluate checkpoints with self-rollout for the oracle number of steps.
    Eval(EvalArgs),
    /// Record latent trajectories of graphs sharing one termination step.
    Record(RecordArgs),
    /// PCA views of trajectory files and symmetry clusters.
    #[command(subcommand)]
    Analyze(AnalyzeCommand),
    /// Build a direction database from reweighting clusters.
    Directions(DirectionsArgs),
    /// Accuracy under latent perturbations along database directions.
    Perturb(PerturbArgs),
    /// Per-step latent displacement of a trajectory file.
    Attractor(AttractorArgs),
    /// Agreement with faulty Bellman-Ford variants and the ever-correct split.
    Mispredict(MispredictArgs),
    /// Accuracy and distance-binned errors across edge probabilities.
    Valgen(ValgenArgs),
    /// Train and evaluate a grid of decay and temperature settings.
    Ablate(AblateArgs),
}

/// Model and data options shared by `train` and `ablate`. Unset flags keep the
/// value from `--config` or the defaults.
#[derive(Debug, Clone, Args)]
pub struct ModelFlags {
    /// JSON training configuration; flags override its values.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, value_parser = parse::<Task>)]
    pub task: Option<Task>,
    /// mpnn, pgn, linear_pgn or triplet_lite.
    #[arg(long, value_parser = parse::<Processor>)]
    pub processor: Option<Processor>,
    /// max, mean, sum or softmax.
    #[arg(long = "agg", value_parser = parse::<Aggregator>)]
    pub aggregator: Option<Aggregator>,
    /// Softmax temperature; only valid with `--agg softmax`.
    #[arg(long)]
    pub temp: Option<f64>,
    /// Latent decay factor in (0, 1].
    #[arg(long)]
    pub decay: Option<f64>,
    /// to_zero or to_mean.
    #[arg(long, value_parser = parse::<DecayMode>)]
    pub decay_mode: Option<DecayMode>,
    #[arg(long)]
    pub latent_dim: Option<usize>,
    /// Hidden width of the message function.
    #[arg(long)]
    pub hidden: Option<usize>,
    #[arg(long)]
    pub train_n: Option<usize>,
    #[arg(long)]
    pub eval_n: Option<usize>,
    /// Edge probability of training and evaluation graphs.
    #[arg(long)]
    pub p: Option<f64>,
    #[arg(long)]
    pub steps: Option<usize>,
    #[arg(long)]
    pub batch: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    /// Probability of feeding the model's own hints during training.
    #[arg(long)]
    pub own_hint_prob: Option<f64>,
    #[arg(long, conflicts_with = "seeds")]
    pub seed: Option<u64>,
    /// Comma-separated list of run seeds.
    #[arg(long, value_delimiter = ',')]
    pub seeds: Option<Vec<u64>>,
    #[arg(long)]
    pub log_every: Option<usize>,
    #[arg(long)]
    pub eval_every: Option<usize>,
    #[arg(long)]
    pub eval_samples: Option<usize>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub model: ModelFlags,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct GraphFlags {
    /// Nodes per graph.
    #[arg(long, default_value_t = 64)]
    pub n: usize,
    #[arg(long, default_value_t = 0.5)]
    pub p: f64,
    #[arg(long, default_value_t = 64)]
    pub samples: usize,
    /// Master seed of the evaluation graphs and noise.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// One or more checkpoints; several are summarised as mean and std.
    #[arg(long, required = true, num_args = 1..)]
    pub ckpt: Vec<PathBuf>,
    /// Defaults to the task stored in the checkpoint.
    #[arg(long, value_parser = parse::<Task>)]
    pub task: Option<Task>,
    #[command(flatten)]
    pub graphs: GraphFlags,
    /// Step offsets for the forced-step table, e.g. `-2,0,2`.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub deltas: Vec<i64>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct RecordArgs {
    #[arg(long)]
    pub ckpt: PathBuf,
    #[arg(long, default_value_t = 16)]
    pub n: usize,
    #[arg(long, default_value_t = 0.5)]
    pub p: f64,
    #[arg(long, default_value_t = 100)]
    pub samples: usize,
    /// Keep only graphs whose oracle run terminates after this many steps.
    #[arg(long)]
    pub t_filter: usize,
    /// Maximum number of graphs drawn while filtering.
    #[arg(long, default_value_t = 100_000)]
    pub budget: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PcaMode {
    /// One point per (sample, step).
    Step,
    /// One point per sample, the flattened trajectory.
    Trajectory,
    /// A separate PCA at every step.
    PerStep,
}

#[derive(Debug, Subcommand)]
pub enum AnalyzeCommand {
    /// Explained variance and projected coordinates of a trajectory file.
    Pca(PcaArgs),
    /// Step-wise projection of reweighting or scaling clusters.
    Clusters(ClustersArgs),
}

#[derive(Debug, Args)]
pub struct PcaArgs {
    #[arg(long)]
    pub traj: PathBuf,
    #[arg(long, value_enum, default_value_t = PcaMode::Step)]
    pub mode: PcaMode,
    #[arg(long, value_parser = parse::<NodeAgg>, default_value = "max")]
    pub node_agg: NodeAgg,
    #[arg(long, default_value_t = 3)]
    pub components: usize,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ClustersArgs {
    #[arg(long)]
    pub ckpt: PathBuf,
    #[arg(long, value_parser = parse::<ClusterKind>, default_value = "reweight")]
    pub kind: ClusterKind,
    #[arg(long, default_value_t = 5)]
    pub clusters: usize,
    #[arg(long, default_value_t = 8)]
    pub cluster_size: usize,
    /// Reweighting margin in (0, 0.5]; unused for scaling clusters.
    #[arg(long, default_value_t = 0.5)]
    pub c: f64,
    #[arg(long)]
    pub t_filter: usize,
    #[arg(long, default_value_t = 3)]
    pub components: usize,
    #[arg(long, default_value_t = 16)]
    pub n: usize,
    #[arg(long, default_value_t = 0.5)]
    pub p: f64,
    #[arg(long, default_value_t = 100_000)]
    pub budget: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct DirectionsArgs {
    #[arg(long)]
    pub ckpt: PathBuf,
    #[arg(long, default_value_t = 100)]
    pub clusters: usize,
    #[arg(long, default_value_t = 8)]
    pub cluster_size: usize,
    /// Reweighting margin in (0, 0.5].
    #[arg(long, default_value_t = 0.5)]
    pub c: f64,
    #[arg(long)]
    pub t_filter: usize,
    #[arg(long, default_value_t = 16)]
    pub n: usize,
    #[arg(long, default_value_t = 0.5)]
    pub p: f64,
    #[arg(long, default_value_t = 100_000)]
    pub budget: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct PerturbArgs {
    #[arg(long)]
    pub ckpt: PathBuf,
    /// Direction database written by `directions`.
    #[arg(long)]
    pub db: PathBuf,
    /// noise_free, directional, random, out (project_out), onto (project_onto) or all.
    #[arg(long, value_delimiter = ',', default_value = "all")]
    pub mode: Vec<String>,
    /// l2_closest, mean or all.
    #[arg(long, value_delimiter = ',', default_value = "all")]
    pub selector: Vec<String>,
    /// Noise scale; defaults to the mean within-cluster spread of each step.
    #[arg(long)]
    pub sigma: Option<f64>,
    #[arg(long, default_value_t = 16)]
    pub n: usize,
    #[arg(long, default_value_t = 0.5)]
    pub p: f64,
    #[arg(long, default_value_t = 64)]
    pub samples: usize,
    #[arg(long, default_value_t = 100_000)]
    pub budget: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct AttractorArgs {
    #[arg(long)]
    pub traj: PathBuf,
    #[arg(long, value_parser = parse::<NodeAgg>, default_value = "max")]
    pub node_agg: NodeAgg,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct MispredictArgs {
    #[arg(long)]
    pub ckpt: PathBuf,
    #[command(flatten)]
    pub graphs: GraphFlags,
    /// Decay constant of the decay variant.
    #[arg(long, default_value_t = 0.9)]
    pub variant_decay: f64,
    /// Noise scale of the noisy variant.
    #[arg(long, default_value_t = 0.05)]
    pub variant_sigma: f64,
    /// Also write per-step predictions and edge labels.
    #[arg(long)]
    pub dump_steps: bool,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ValgenArgs {
    #[arg(long)]
    pub ckpt: PathBuf,
    #[arg(long, default_value_t = 64)]
    pub n: usize,
    #[arg(long, value_delimiter = ',', default_value = "0.5,0.25")]
    pub p_values: Vec<f64>,
    #[arg(long, default_value_t = 0.5)]
    pub reference_p: f64,
    #[arg(long, default_value_t = 64)]
    pub samples: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Re-evaluate with weights scaled by the mean-distance ratio.
    #[arg(long)]
    pub rescale: bool,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct AblateArgs {
    #[command(flatten)]
    pub model: ModelFlags,
    /// Decay factors, e.g. `1,0.9,0.5`.
    #[arg(long, value_delimiter = ',')]
    pub decay_grid: Vec<f64>,
    /// Softmax temperatures; 0 stands for the max aggregator.
    #[arg(long, value_delimiter = ',')]
    pub temp_grid: Vec<f64>,
    #[arg(long, value_delimiter = ',', value_parser = parse::<DecayMode>)]
    pub decay_modes: Vec<DecayMode>,
    /// Evaluation graphs per run.
    #[arg(long, default_value_t = 64)]
    pub samples: usize,
    /// Keep every trained checkpoint in the output directory.
    #[arg(long)]
    pub keep_checkpoints: bool,
    #[arg(long)]
    pub out: PathBuf,
}
