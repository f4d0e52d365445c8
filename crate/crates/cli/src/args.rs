//! The command-line grammar. Flag values deliberately stay close to the
//! config-file keys so the two layers read the same.

use clap::{Args, Parser, Subcommand};
use std::path::PathBuf;

#[derive(Parser)]
#[command(
    name = "cbn",
    version,
    about = "Mixture-normalized dual-path training for long-tailed classification"
)]
pub struct Cli {
    #[command(subcommand)]
    pub cmd: Cmd,
}

#[derive(Subcommand)]
pub enum Cmd {
    /// Generate a synthetic long-tailed dataset container plus a CSV preview
    GenData(GenDataArgs),
    /// Train a model; writes a manifest, per-epoch metrics CSV, checkpoints, and a JSON summary
    Train(TrainArgs),
    /// Evaluate a checkpoint on a dataset's balanced test split
    Eval(EvalArgs),
    /// Verify analytic gradients against central finite differences
    Gradcheck(GradcheckArgs),
}

#[derive(Args)]
pub struct GenDataArgs {
    /// Number of classes (at least 2)
    #[arg(long, default_value_t = 10)]
    pub k: usize,
    /// Feature dimension
    #[arg(long, default_value_t = 16)]
    pub d: usize,
    /// Head-to-tail imbalance ratio (at least 1)
    #[arg(long, default_value_t = 100.0)]
    pub rho: f64,
    /// Training-sample count of the largest class
    #[arg(long, default_value_t = 500)]
    pub nmax: usize,
    /// Generator seed
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Distance scale between class centers (positive)
    #[arg(long, default_value_t = 3.0)]
    pub separation: f64,
    /// Output path for the binary container
    #[arg(long, default_value = "dataset.bin")]
    pub out: PathBuf,
    /// Rows included in the human-readable CSV preview
    #[arg(long, default_value_t = 16)]
    pub preview_rows: usize,
}

#[derive(Args)]
pub struct TrainArgs {
    /// Dataset container produced by gen-data
    #[arg(long)]
    pub data: PathBuf,
    /// Directory receiving the manifest, metrics, checkpoints, and summary
    #[arg(long)]
    pub out_dir: PathBuf,
    /// Flat key-value config file; flags override its entries
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Normalization family: plain running-stats ("bn", forces m = 1) or the
    /// posterior-blended mixture ("cbn")
    #[arg(long, value_parser = ["bn", "cbn"])]
    pub norm: Option<String>,
    /// Label-routed normalization path during training
    #[arg(long, value_parser = ["on", "off"])]
    pub sbn: Option<String>,
    /// Mixture component count
    #[arg(long)]
    pub m: Option<usize>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    /// Peak learning rate of the cosine schedule
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Weight of the classification loss
    #[arg(long)]
    pub w_cls: Option<f64>,
    /// Weight of the cross-view consistency loss
    #[arg(long)]
    pub w_sim: Option<f64>,
    /// Hidden widths as a comma list, e.g. "32,32"
    #[arg(long)]
    pub hidden: Option<String>,
    /// Two-stage schedule: representation epochs, then classifier-only epochs
    #[arg(long)]
    pub decouple: bool,
    /// Fraction of epochs given to the classifier-only stage
    #[arg(long)]
    pub decouple_fraction: Option<f64>,
    /// Class-balanced resampling (uniform class, then uniform instance)
    #[arg(long)]
    pub resample: bool,
    /// Inverse-frequency loss reweighting
    #[arg(long)]
    pub reweight: bool,
    /// Write a checkpoint every N epochs (0 disables periodic checkpoints;
    /// the final checkpoint is always written)
    #[arg(long)]
    pub checkpoint_interval: Option<usize>,
}

#[derive(Args)]
pub struct EvalArgs {
    /// Checkpoint file written by train
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// Dataset container providing the test split and train counts
    #[arg(long)]
    pub data: PathBuf,
    /// Also write the metrics JSON here (always printed to standard output)
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args)]
pub struct GradcheckArgs {
    /// Relative tolerance; the absolute tolerance is tol/100
    #[arg(long, default_value_t = 1e-6)]
    pub tol: f64,
    /// Base seed; instance i uses seed + i
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Instances per check family
    #[arg(long, default_value_t = 20)]
    pub instances: usize,
}
