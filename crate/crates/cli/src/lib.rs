//! Command-line front end: dataset generation, both training stages,
//! evaluation, standalone degradation and SVG rendering.

pub mod commands;
pub mod config;
pub mod render;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

pub use config::{Paths, RunConfig};

#[derive(Debug, Parser)]
#[command(name = "rapd", version, about = "Semi-supervised point cloud completion")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic dataset (clouds.pcb + manifest.csv).
    GenData(GenDataArgs),
    /// First stage: train both autoencoders and write the prior checkpoint.
    Pretrain(PretrainArgs),
    /// Second stage: train the completion network.
    Distill(DistillArgs),
    /// Score a completion checkpoint on the test pairs.
    Eval(EvalArgs),
    /// Degrade a predicted cloud towards a partial cloud.
    Degrade(DegradeArgs),
    /// Render a cloud to SVG.
    Render(RenderArgs),
    /// Print a configuration as TOML.
    ShowConfig(ShowConfigArgs),
}

/// Overrides shared by the training commands.
#[derive(Debug, Default, Args)]
pub struct TrainOverrides {
    #[arg(long)]
    pub epochs: Option<u32>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub batch_size: Option<usize>,
}

#[derive(Debug, Args)]
pub struct GenDataArgs {
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub num_pairs: Option<usize>,
    #[arg(long)]
    pub paired_fraction: Option<f64>,
    #[arg(long)]
    pub categories: Option<u32>,
    #[arg(long)]
    pub num_test_pairs: Option<usize>,
    #[arg(long)]
    pub num_points: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Write into a non-empty output directory.
    #[arg(long)]
    pub force: bool,
}

#[derive(Debug, Args)]
pub struct PretrainArgs {
    #[arg(long)]
    pub data: Option<PathBuf>,
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    pub train: TrainOverrides,
}

#[derive(Debug, Args)]
pub struct DistillArgs {
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// First-stage checkpoint; required unless every distillation flag is off.
    #[arg(long)]
    pub prior: Option<PathBuf>,
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    pub train: TrainOverrides,
    #[arg(long)]
    pub no_weight_distill_encoder: bool,
    #[arg(long)]
    pub no_weight_distill_decoder: bool,
    #[arg(long)]
    pub no_feature_distill: bool,
    #[arg(long)]
    pub no_self_sup: bool,
    #[arg(long)]
    pub no_discriminator: bool,
    /// kl, js, l1 or cosine.
    #[arg(long)]
    pub latent_distance: Option<String>,
    /// k_mask, voxel_mask, tau_mask or random_downsample.
    #[arg(long)]
    pub degradation: Option<String>,
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long)]
    pub tau: Option<f64>,
    #[arg(long)]
    pub resolution: Option<usize>,
    #[arg(long)]
    pub checkpoint_every: Option<u32>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, clap::ValueEnum)]
pub enum EvalSplit {
    /// Odd-indexed test pairs, never seen during model selection.
    #[default]
    HeldOut,
    /// Even-indexed test pairs used for model selection.
    Validation,
    All,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub data: Option<PathBuf>,
    #[arg(long, required_unless_present = "identity")]
    pub checkpoint: Option<PathBuf>,
    /// Checks the checkpoint against this configuration's architecture and digest.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Per-category CSV report.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = EvalSplit::HeldOut)]
    pub split: EvalSplit,
    /// Score the partial inputs themselves instead of a network.
    #[arg(long, conflicts_with = "checkpoint")]
    pub identity: bool,
}

#[derive(Debug, Args)]
pub struct DegradeArgs {
    #[arg(long)]
    pub predicted: PathBuf,
    #[arg(long)]
    pub partial: PathBuf,
    #[arg(long, default_value = "k_mask")]
    pub method: String,
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long)]
    pub tau: Option<f64>,
    #[arg(long)]
    pub resolution: Option<usize>,
    /// Output point count; defaults to the predicted cloud's size.
    #[arg(long)]
    pub output_size: Option<usize>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct RenderArgs {
    /// A .ply file, or a .pcb file together with --index.
    #[arg(long)]
    pub cloud: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub index: usize,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value = "+z", allow_hyphen_values = true)]
    pub view: String,
    #[arg(long, default_value_t = 512)]
    pub size: u32,
}

#[derive(Debug, Args)]
pub struct ShowConfigArgs {
    #[arg(long, conflicts_with = "config")]
    pub preset: Option<String>,
    #[arg(long)]
    pub config: Option<PathBuf>,
}

/// Runs one parsed command line.
pub fn run(cli: Cli) -> anyhow::Result<()> {
    let workers = commands::workers_from_env()?;
    commands::init_thread_pool(workers);
    match cli.command {
        Command::GenData(a) => commands::gen_data(a, workers),
        Command::Pretrain(a) => commands::pretrain(a),
        Command::Distill(a) => commands::distill(a),
        Command::Eval(a) => commands::eval(a),
        Command::Degrade(a) => commands::degrade(a),
        Command::Render(a) => commands::render(a),
        Command::ShowConfig(a) => commands::show_config(a),
    }
}

/// Machine-readable kind of an error chain: the first library error's kind,
/// `io` for bare I/O failures, `other` otherwise.
pub fn error_kind(err: &anyhow::Error) -> &'static str {
    for cause in err.chain() {
        if let Some(e) = cause.downcast_ref::<rapd_core::Error>() {
            return e.kind();
        }
        if cause.downcast_ref::<std::io::Error>().is_some() {
            return "io";
        }
    }
    "other"
}

/// `error: <kind>: <message chain>` on one line.
pub fn error_line(err: &anyhow::Error) -> String {
    let msg = err.chain().map(|c| c.to_string()).collect::<Vec<_>>().join(": ");
    format!("error: {}: {}", error_kind(err), msg.replace('\n', " "))
}
