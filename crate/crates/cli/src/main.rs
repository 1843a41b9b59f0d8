//! `granular`: dataset generation, GNS training, rollout evaluation,
//! optimal-transport utilities and pour planning.

mod commands;
mod error;
mod manifest;
mod svg;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use error::CliResult;

#[derive(Parser, Debug)]
#[command(name = "granular", version, about = "Learned granular dynamics and pour planning")]
struct Cli {
    /// Worker threads for parallel sections; defaults to all cores.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Simulate a training or test dataset with the contact model.
    GenData(GenDataArgs),
    /// Train a learned simulator on a dataset.
    Train(TrainArgs),
    /// Roll a trained model out along recorded episodes and score it.
    Rollout(RolloutArgs),
    /// Compare several checkpoints on one test set.
    Ablation(AblationArgs),
    /// Transport distances between two point-cloud files.
    Ot(OtArgs),
    /// Optimize a pouring trajectory toward a target cloud.
    Plan(PlanArgs),
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum Preset {
    Desk2d,
    Paper3d,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum Switch {
    On,
    Off,
}

#[derive(Args, Debug)]
pub struct GenDataArgs {
    /// Scene configuration JSON.
    #[arg(long, conflicts_with = "preset", required_unless_present = "preset")]
    pub scene: Option<PathBuf>,
    /// Built-in scene instead of a file.
    #[arg(long, value_enum)]
    pub preset: Option<Preset>,
    /// Number of simulations, including the noise-only and no-cup records.
    #[arg(long)]
    pub sims: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Frames per simulation; overrides the scene.
    #[arg(long)]
    pub horizon: Option<usize>,
    /// Comma-separated trajectory families to draw from.
    #[arg(long, value_delimiter = ',')]
    pub families: Vec<String>,
    /// Omit the noise-only and no-cup records.
    #[arg(long)]
    pub no_special: bool,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct TrainArgs {
    /// Dataset directory written by gen-data.
    #[arg(long)]
    pub data: PathBuf,
    /// Base model configuration JSON; flags below override its fields.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Message-passing steps.
    #[arg(long)]
    pub k: Option<usize>,
    /// Velocity history length.
    #[arg(long)]
    pub history: Option<usize>,
    #[arg(long, value_enum)]
    pub controls: Option<Switch>,
    /// Loss variant: `g` or `g+r`.
    #[arg(long)]
    pub loss: Option<String>,
    /// Latent and hidden layer width.
    #[arg(long)]
    pub width: Option<usize>,
    #[arg(long, default_value_t = 300)]
    pub epochs: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub samples_per_epoch: Option<usize>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    /// Training noise standard deviation, meters.
    #[arg(long)]
    pub noise: Option<f64>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct RolloutArgs {
    /// Checkpoint directory; not needed with `--oracle`.
    #[arg(long, required_unless_present = "oracle")]
    pub checkpoint: Option<PathBuf>,
    /// Dataset holding the reference episodes.
    #[arg(long)]
    pub reference: PathBuf,
    /// Record indices to roll out; all records by default.
    #[arg(long, value_delimiter = ',')]
    pub records: Vec<usize>,
    /// History length used with `--oracle`.
    #[arg(long, default_value_t = 5)]
    pub history: usize,
    /// Feed the recorded frames back instead of model predictions.
    #[arg(long)]
    pub oracle: bool,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct AblationArgs {
    /// Checkpoint directories, one table row each.
    #[arg(long = "checkpoint", required = true)]
    pub checkpoints: Vec<PathBuf>,
    /// Test dataset.
    #[arg(long)]
    pub test: PathBuf,
    /// Record indices of the test set; all records by default.
    #[arg(long, value_delimiter = ',')]
    pub records: Vec<usize>,
    /// Use only the family records (skip noise-only and no-cup).
    #[arg(long)]
    pub families_only: bool,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct OtArgs {
    /// First cloud, little-endian f32 coordinates.
    #[arg(long)]
    pub a: PathBuf,
    #[arg(long)]
    pub b: PathBuf,
    #[arg(long)]
    pub dim: usize,
    /// Entropic regularization; defaults to (0.05 × bounding diagonal)².
    #[arg(long)]
    pub epsilon: Option<f64>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct PlanArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// Dataset whose record supplies the start state and initial trajectory.
    #[arg(long)]
    pub initial: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub record: usize,
    /// Target cloud file, little-endian f32 coordinates.
    #[arg(long, conflicts_with = "target_dataset", required_unless_present = "target_dataset")]
    pub target: Option<PathBuf>,
    /// Dataset whose record's final granular frame is the target.
    #[arg(long, requires = "target_record")]
    pub target_dataset: Option<PathBuf>,
    #[arg(long)]
    pub target_record: Option<usize>,
    /// Number of CMA-ES restarts, seeded 0..n.
    #[arg(long, default_value_t = 5)]
    pub seeds: u64,
    /// CMA-ES generations per seed.
    #[arg(long, default_value_t = 150)]
    pub iters: usize,
    #[arg(long, default_value_t = 20)]
    pub population: usize,
    #[arg(long, default_value_t = 6)]
    pub via_points: usize,
    #[arg(long)]
    pub sigma0: Option<f64>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub beta: Option<f64>,
    #[arg(long)]
    pub epsilon: Option<f64>,
    /// Write an SVG of the target and predicted clouds.
    #[arg(long)]
    pub emit_plots: bool,
    #[arg(long)]
    pub out: PathBuf,
}

fn run(cli: Cli) -> CliResult<()> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return error::usage("--threads must be positive");
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| error::CliError::Usage(e.to_string()))?;
    }
    match cli.command {
        Command::GenData(a) => commands::gen_data::run(&a),
        Command::Train(a) => commands::train::run(&a),
        Command::Rollout(a) => commands::rollout::run(&a),
        Command::Ablation(a) => commands::ablation::run(&a),
        Command::Ot(a) => commands::ot::run(&a),
        Command::Plan(a) => commands::plan::run(&a),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
