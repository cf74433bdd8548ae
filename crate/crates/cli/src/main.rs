//! `adda`: synthesize data, pretrain, adapt, evaluate and inspect models.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(
    name = "adda",
    version,
    about = "Adversarial adaptive 1-D CNN fault diagnosis"
)]
pub struct Cli {
    /// Root seed; overrides any seed in a config file.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads for batch passes. Results do not depend on it.
    #[arg(long, global = true, env = "ADDA_THREADS")]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write synthetic recordings, their manifest and the resolved config.
    Synth(SynthArgs),
    /// Train a source extractor on labeled spectra.
    Pretrain(PretrainArgs),
    /// Adversarially adapt a pretrained extractor to a target domain.
    Adapt(AdaptArgs),
    /// Accuracy, confusion matrix and per-class precision/recall.
    Eval(EvalArgs),
    /// Proxy domain divergence between source and target features.
    Divergence(PairArgs),
    /// Write source and target features as CSV.
    ExportFeatures(PairArgs),
    /// Adapt once per untie depth l = 1..7 and tabulate accuracy.
    SweepL(SweepArgs),
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// SynthConfig JSON. Without it the built-in ten-class fixture is used.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
    /// Fixture line displacement in bins (ignored with --config).
    #[arg(long, default_value_t = 0)]
    pub shift: i64,
    /// Fixture amplitude scale (ignored with --config).
    #[arg(long, default_value_t = 1.0)]
    pub scale: f64,
    /// Fixture noise standard deviation (ignored with --config).
    #[arg(long, default_value_t = 0.05)]
    pub noise: f64,
    /// Domain label written into the manifest.
    #[arg(long, value_enum, default_value_t = Domain::Source)]
    pub domain: Domain,
    /// Length of each class recording in samples.
    #[arg(long, default_value_t = 4 * 4096)]
    pub recording_len: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum, serde::Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Domain {
    Source,
    Target,
}

#[derive(Debug, Args)]
pub struct PretrainArgs {
    /// Manifest or SynthConfig JSON of the labeled source domain.
    #[arg(long)]
    pub data: PathBuf,
    /// PretrainConfig JSON; flags override its fields.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub out_model: PathBuf,
    #[arg(long)]
    pub out_log: PathBuf,
    #[arg(long)]
    pub iters: Option<usize>,
    #[arg(long)]
    pub batch: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
}

#[derive(Debug, Args)]
pub struct FinetuneArgs {
    /// Labeled source domain (manifest or SynthConfig JSON).
    #[arg(long)]
    pub source: PathBuf,
    /// Target domain; its labels are only used for reporting.
    #[arg(long)]
    pub target: PathBuf,
    /// Pretrained source model.
    #[arg(long)]
    pub model: PathBuf,
    /// Discriminator steps per target-extractor step.
    #[arg(long)]
    pub k: Option<usize>,
    /// FinetuneConfig JSON; flags override its fields.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub iters: Option<usize>,
    #[arg(long)]
    pub batch: Option<usize>,
    #[arg(long)]
    pub lr_d: Option<f64>,
    #[arg(long)]
    pub lr_mt: Option<f64>,
}

#[derive(Debug, Args)]
pub struct AdaptArgs {
    #[command(flatten)]
    pub common: FinetuneArgs,
    /// Number of trailing extractor groups to adapt (1..7).
    #[arg(long)]
    pub untie: Option<usize>,
    #[arg(long)]
    pub out_model: PathBuf,
    #[arg(long)]
    pub out_log: PathBuf,
    /// Export features every N iterations into --snapshot-dir.
    #[arg(long)]
    pub snapshot_every: Option<usize>,
    #[arg(long, requires = "snapshot_every")]
    pub snapshot_dir: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub common: FinetuneArgs,
    #[arg(long)]
    pub out_csv: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    /// MetricsReport JSON.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct PairArgs {
    #[arg(long)]
    pub source_model: PathBuf,
    #[arg(long)]
    pub target_model: PathBuf,
    #[arg(long)]
    pub source: PathBuf,
    #[arg(long)]
    pub target: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Fraction of the pooled features used to train the domain classifier.
    #[arg(long, default_value_t = 0.5)]
    pub split: f64,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match commands::run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let msg = format!("{e:#}").replace('\n', " ");
            eprintln!("adda: error: {msg}");
            ExitCode::from(2)
        }
    }
}
