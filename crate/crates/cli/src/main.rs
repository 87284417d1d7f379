//! `negraph`: command line front end for the graph refinement toolkit.
//!
//! Every subcommand prints a single JSON report to stdout and exits with
//! 0 on success, 1 on usage errors, 2 on data errors, and 3 on numeric
//! failures. Reports are deterministic for a fixed seed and inputs.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser)]
#[command(name = "negraph", version, about = "Neighbor-quality graph refinement toolkit")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand)]
pub enum Command {
    /// Summarize a bundle: sizes, degrees, and neighbor-quality ratios.
    Stats(StatsArgs),
    /// Train the symmetric edge classifier on a bundle's train split.
    TrainEdge(TrainEdgeArgs),
    /// Rewire a bundle with a trained checkpoint or a label oracle.
    Refine(RefineArgs),
    /// Train and evaluate the node classifier on one or two bundles.
    TrainClf(TrainClfArgs),
    /// Add different-label edges to every node of a bundle.
    Degrade(DegradeArgs),
    /// Sweep oracle quality over synthetic graphs and tabulate gains.
    Simulate(SimulateArgs),
    /// Aggregate embeddings over an interaction graph and rank items.
    Reco(RecoArgs),
    /// Generate a synthetic labeled bundle or bipartite dataset.
    Synth(SynthArgs),
    /// Convert citation-style content/cites tables into a bundle.
    ConvertCitation(ConvertCitationArgs),
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum EmbeddingArg {
    /// Two-step degree-normalized feature smoothing.
    #[value(name = "a2x")]
    A2x,
    /// Raw bundle features, no smoothing.
    #[value(name = "raw")]
    Raw,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PolicyArg {
    /// Rank partners by random-walk visit counts.
    RandomWalk,
    /// Rank partners by interaction weight.
    Intuitive,
    /// Rank partners by compatibility score.
    Negcn,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SynthKind {
    /// Labeled node-classification bundle.
    Graph,
    /// User-item interactions with embeddings.
    Bipartite,
}

#[derive(Args)]
pub struct StatsArgs {
    /// Bundle directory.
    pub bundle: PathBuf,
}

#[derive(Args)]
pub struct TrainEdgeArgs {
    /// Bundle directory.
    pub bundle: PathBuf,
    /// Checkpoint file to write.
    #[arg(long)]
    pub out: PathBuf,
    /// Node embedding fed to the classifier.
    #[arg(long, value_enum, default_value = "a2x")]
    pub embedding: EmbeddingArg,
    /// Width of the shared edge projection.
    #[arg(long, default_value_t = 64)]
    pub proj_dim: usize,
    /// Comma-separated hidden layer widths.
    #[arg(long, value_delimiter = ',', default_values_t = vec![64usize])]
    pub hidden: Vec<usize>,
    #[arg(long, default_value_t = 200)]
    pub epochs: usize,
    #[arg(long, default_value_t = 128)]
    pub batch_size: usize,
    #[arg(long, default_value_t = 0.05)]
    pub lr: f64,
    #[arg(long, default_value_t = 0.9)]
    pub momentum: f64,
    /// Sample all negatives instead of starting from observed
    /// different-label edges.
    #[arg(long)]
    pub exclude_observed_negatives: bool,
    /// Decision threshold used by the validation report.
    #[arg(long, default_value_t = 0.5)]
    pub threshold: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Args)]
#[command(group = clap::ArgGroup::new("scorer").required(true).args(["checkpoint", "oracle"])) ]
pub struct RefineArgs {
    /// Bundle directory.
    pub bundle: PathBuf,
    /// Output bundle directory.
    #[arg(long)]
    pub out: PathBuf,
    /// Only drop low-scoring neighbors.
    #[arg(long, conflicts_with = "add_only")]
    pub filter_only: bool,
    /// Only add high-scoring two-hop neighbors.
    #[arg(long)]
    pub add_only: bool,
    /// Trained edge-classifier checkpoint.
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    /// Label oracle rates as "p,q" (true and false positive rates).
    #[arg(long)]
    pub oracle: Option<String>,
    /// Degree cap for the add step.
    #[arg(long, default_value_t = 6)]
    pub n_max: usize,
    /// Scores at or below this are dropped; above it qualify for adding.
    #[arg(long, default_value_t = 0.5)]
    pub threshold: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Args)]
pub struct TrainClfArgs {
    /// Bundle directory; supplies features, labels, and splits.
    pub bundle: PathBuf,
    /// Optional second bundle whose graph is compared against the first.
    pub enhanced: Option<PathBuf>,
    /// Propagation steps.
    #[arg(long, default_value_t = 2)]
    pub k: usize,
    #[arg(long, default_value_t = 0.5)]
    pub lr: f64,
    #[arg(long, default_value_t = 5e-6)]
    pub weight_decay: f64,
    #[arg(long, default_value_t = 300)]
    pub max_epochs: usize,
    /// Epochs without validation improvement before stopping.
    #[arg(long, default_value_t = 30)]
    pub patience: usize,
    /// Skip row-normalizing features before smoothing.
    #[arg(long)]
    pub no_normalize: bool,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Args)]
pub struct DegradeArgs {
    /// Bundle directory.
    pub bundle: PathBuf,
    /// Output bundle directory.
    #[arg(long)]
    pub out: PathBuf,
    /// Different-label neighbors every node must gain.
    #[arg(long)]
    pub per_node: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Args)]
pub struct SimulateArgs {
    /// CSV output file; stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Comma-separated oracle true positive rates.
    #[arg(long, value_delimiter = ',', default_values_t = vec![0.9])]
    pub p_grid: Vec<f64>,
    /// Comma-separated oracle false positive rates.
    #[arg(long, value_delimiter = ',', default_values_t = vec![0.2, 0.5, 0.8])]
    pub q_grid: Vec<f64>,
    /// Seeds averaged per grid cell.
    #[arg(long, default_value_t = 3)]
    pub seeds: u64,
    #[arg(long, default_value_t = 300)]
    pub num_nodes: usize,
    #[arg(long, default_value_t = 4)]
    pub num_classes: usize,
    #[arg(long, default_value_t = 3.0)]
    pub mean_degree: f64,
    #[arg(long, default_value_t = 0.7)]
    pub target_ratio: f64,
    #[arg(long, default_value_t = 8)]
    pub feature_dim: usize,
    #[arg(long, default_value_t = 1.5)]
    pub class_separation: f64,
    /// Degree cap for the add step.
    #[arg(long, default_value_t = 8)]
    pub n_max: usize,
    /// Node-classifier epoch cap per arm.
    #[arg(long, default_value_t = 150)]
    pub max_epochs: usize,
    /// Node-classifier learning rate.
    #[arg(long, default_value_t = 0.5)]
    pub lr: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Args)]
pub struct RecoArgs {
    /// Training interactions, one "user<TAB>item[<TAB>weight]" per line.
    #[arg(long)]
    pub train: PathBuf,
    /// Held-out interactions in the same format.
    #[arg(long)]
    pub test: PathBuf,
    /// Embeddings meta JSON file.
    #[arg(long)]
    pub embeddings: PathBuf,
    /// Neighbor selection policy.
    #[arg(long, value_enum)]
    pub policy: PolicyArg,
    /// Cutoff for precision, recall, and ranking gain.
    #[arg(long, default_value_t = 20)]
    pub k: usize,
    /// Weight of a node's own embedding in the blend.
    #[arg(long, default_value_t = 0.5)]
    pub alpha: f64,
    /// Partners kept per node.
    #[arg(long, default_value_t = 10)]
    pub k_neighbors: usize,
    /// Random-walk policy only: walks launched per node.
    #[arg(long, default_value_t = 100)]
    pub walks: usize,
    /// Random-walk policy only: steps per walk.
    #[arg(long, default_value_t = 3)]
    pub walk_length: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Args)]
pub struct SynthArgs {
    /// What to generate.
    #[arg(long, value_enum)]
    pub kind: SynthKind,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Graph kind: node count.
    #[arg(long, default_value_t = 1000)]
    pub num_nodes: usize,
    /// Graph kind: class count.
    #[arg(long, default_value_t = 4)]
    pub num_classes: usize,
    /// Graph kind: Poisson mean of per-node partner draws.
    #[arg(long, default_value_t = 5.0)]
    pub mean_degree: f64,
    /// Graph kind: probability a drawn partner shares the node's class.
    #[arg(long, default_value_t = 0.7)]
    pub target_ratio: f64,
    /// Graph kind: feature width.
    #[arg(long, default_value_t = 16)]
    pub feature_dim: usize,
    /// Graph kind: distance between class feature means.
    #[arg(long, default_value_t = 1.0)]
    pub class_separation: f64,
    /// Bipartite kind: user count.
    #[arg(long, default_value_t = 100)]
    pub num_users: usize,
    /// Bipartite kind: item count.
    #[arg(long, default_value_t = 200)]
    pub num_items: usize,
    /// Bipartite kind: group count.
    #[arg(long, default_value_t = 4)]
    pub num_groups: usize,
    /// Bipartite kind: cross-group interaction probability.
    #[arg(long, default_value_t = 0.1)]
    pub noise: f64,
    /// Bipartite kind: stddev of the perturbation on group embeddings.
    #[arg(long, default_value_t = 0.1)]
    pub embedding_noise: f64,
}

#[derive(Args)]
pub struct ConvertCitationArgs {
    /// Content table: "<id>TAB<w_1>TAB...TAB<w_d>TAB<class>" per line.
    #[arg(long)]
    pub content: PathBuf,
    /// Citation table: "<cited id>TAB<citing id>" per line.
    #[arg(long)]
    pub cites: PathBuf,
    /// Output bundle directory.
    #[arg(long)]
    pub out: PathBuf,
    /// Training nodes drawn from every class.
    #[arg(long, default_value_t = 20)]
    pub train_per_class: usize,
    #[arg(long, default_value_t = 500)]
    pub val_count: usize,
    #[arg(long, default_value_t = 1000)]
    pub test_count: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            return match err.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    print!("{err}");
                    ExitCode::SUCCESS
                }
                _ => {
                    eprint!("{err}");
                    ExitCode::from(1)
                }
            };
        }
    };
    match commands::run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(commands::CliError::Data(message)) => {
            eprintln!("error: {message}");
            ExitCode::from(2)
        }
        Err(commands::CliError::Numeric(message)) => {
            eprintln!("error: {message}");
            ExitCode::from(3)
        }
    }
}
