use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use rehab_contrast::contrastive::DenominatorMode;
use rehab_contrast::inference::VarianceKind;
use rehab_contrast::model::HeadMode;

use crate::config::{Protocol, ThresholdPolicy};

#[derive(Debug, Parser)]
#[command(name = "rehab-contrast", version, about = "Contrastive exercise assessment on skeleton sequences")]
pub struct Cli {
    /// Print failures as a JSON object on stderr.
    #[arg(long, global = true)]
    pub error_json: bool,

    /// More log output; repeat for more.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,

    /// Only warnings and errors.
    #[arg(short, long, global = true, conflicts_with = "verbose")]
    pub quiet: bool,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Convert a raw dataset into the canonical directory format.
    Prepare(PrepareArgs),
    /// Write a generated dataset in the canonical format.
    Synth(SynthArgs),
    /// Contrastive training, followed by references and a held-out report.
    Train(TrainArgs),
    /// Fit a regression head to clinical scores on top of a trained encoder.
    Transfer(TransferArgs),
    /// Per-type accuracy, AUC ROC and AUC PR of a checkpoint.
    Eval(EvalArgs),
    /// Build per-type references and thresholds from a dataset.
    Calibrate(CalibrateArgs),
    /// Score and classify samples.
    Infer(InferArgs),
    /// Export representations, optionally with a 2-D projection.
    Embed(EmbedArgs),
    /// Draw an embedding projection or a training curve as SVG.
    Plot(PlotArgs),
}

#[derive(Debug, Args)]
pub struct PrepareArgs {
    /// uiprmd, irds or kimore.
    #[arg(long)]
    pub dataset: String,
    #[arg(long)]
    pub root: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Frames per sample after resampling.
    #[arg(long, default_value_t = 64)]
    pub length: usize,
    /// Replace an existing canonical directory.
    #[arg(long)]
    pub force: bool,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 60)]
    pub samples_per_type: usize,
    #[arg(long, default_value_t = 32)]
    pub frames: usize,
    /// Generate clinical scores for this movement (0, 1 or 2) instead of binary labels.
    #[arg(long)]
    pub regression: Option<usize>,
    #[arg(long)]
    pub force: bool,
}

/// Flags shared by commands that read a run configuration.
#[derive(Debug, Args)]
pub struct ConfigArgs {
    /// TOML run configuration; flags override its values.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Canonical dataset directory, overriding `dataset.canonical`.
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Run directory, overriding `out_dir`.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Seed of the train/validation split.
    #[arg(long)]
    pub split_seed: Option<u64>,
    #[arg(long)]
    pub protocol: Option<Protocol>,
    #[arg(long)]
    pub fold: Option<usize>,
    #[arg(long)]
    pub exercise_type: Option<String>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub common: ConfigArgs,
    /// Seed for initialization, shuffling and augmentation.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub batch_tuples: Option<usize>,
    #[arg(long)]
    pub learning_rate: Option<f64>,
    /// Feed rotation-invariant Gram descriptors to the encoder.
    #[arg(long)]
    pub ri: bool,
    #[arg(long, value_parser = parse_loss_mode)]
    pub loss_mode: Option<DenominatorMode>,
    #[arg(long)]
    pub temperature: Option<f64>,
    #[arg(long, value_parser = parse_head_mode)]
    pub head_mode: Option<HeadMode>,
    /// Write a checkpoint every N epochs.
    #[arg(long)]
    pub checkpoint_every: Option<usize>,
    /// Continue from this checkpoint instead of a fresh model.
    #[arg(long)]
    pub resume: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TransferArgs {
    #[command(flatten)]
    pub common: ConfigArgs,
    /// Contrastively trained checkpoint providing the encoder.
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// Separate validation set; otherwise the protocol splits `--data`.
    #[arg(long)]
    pub validation: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub batch_tuples: Option<usize>,
    #[arg(long)]
    pub learning_rate: Option<f64>,
    /// Keep encoder weights fixed.
    #[arg(long, conflicts_with = "fine_tune")]
    pub freeze_encoder: bool,
    /// Update encoder weights together with the head.
    #[arg(long)]
    pub fine_tune: bool,
    /// Start from a freshly initialized encoder with the checkpoint's architecture.
    #[arg(long)]
    pub from_scratch: bool,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[command(flatten)]
    pub common: ConfigArgs,
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// Evaluate all of `--data` against these references instead of
    /// building them from the protocol's training part.
    #[arg(long)]
    pub references: Option<PathBuf>,
    #[arg(long, value_parser = parse_head_mode)]
    pub head_mode: Option<HeadMode>,
    #[arg(long)]
    pub threshold: Option<ThresholdPolicy>,
    /// Also report an RBF SVM probe trained on the training part's representations.
    #[arg(long)]
    pub svm: bool,
}

#[derive(Debug, Args)]
pub struct CalibrateArgs {
    #[command(flatten)]
    pub common: ConfigArgs,
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long, value_parser = parse_head_mode)]
    pub head_mode: Option<HeadMode>,
    #[arg(long)]
    pub epsilon: Option<f64>,
    #[arg(long, value_parser = parse_variance)]
    pub variance: Option<VarianceKind>,
    #[arg(long)]
    pub threshold: Option<ThresholdPolicy>,
}

#[derive(Debug, Args)]
pub struct InferArgs {
    #[command(flatten)]
    pub common: ConfigArgs,
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// Required for contrastive checkpoints; unused for regression checkpoints.
    #[arg(long)]
    pub references: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EmbedArgs {
    #[command(flatten)]
    pub common: ConfigArgs,
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// Append reference rows; also selects their head mode.
    #[arg(long)]
    pub references: Option<PathBuf>,
    #[arg(long, value_parser = parse_head_mode)]
    pub head_mode: Option<HeadMode>,
    /// Add a 2-component t-SNE projection.
    #[arg(long)]
    pub project: bool,
    #[arg(long, default_value_t = 20.0)]
    pub perplexity: f64,
    #[arg(long, default_value_t = 1000)]
    pub iterations: usize,
}

#[derive(Debug, Args)]
pub struct PlotArgs {
    /// Embedding table written by `embed`.
    #[arg(long, conflicts_with = "log", required_unless_present = "log")]
    pub embeddings: Option<PathBuf>,
    /// Training log written by `train` or `transfer`.
    #[arg(long)]
    pub log: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    /// Used when the table has no projection columns yet.
    #[arg(long, default_value_t = 20.0)]
    pub perplexity: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

fn parse_head_mode(s: &str) -> Result<HeadMode, String> {
    s.parse().map_err(|e: rehab_contrast::Error| e.to_string())
}

fn parse_loss_mode(s: &str) -> Result<DenominatorMode, String> {
    s.parse().map_err(|e: rehab_contrast::Error| e.to_string())
}

fn parse_variance(s: &str) -> Result<VarianceKind, String> {
    s.parse().map_err(|e: rehab_contrast::Error| e.to_string())
}
