use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "smartex", version, about = "Weight compression, accelerator cost models and dataflow search")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Decompose every layer's weights and tabulate storage statistics.
    Compress(CompressArgs),
    /// Evaluate a dataflow on every layer of a workload.
    Model(ModelArgs),
    /// Search for the best dataflow per layer.
    Dse(DseArgs),
    /// Convert a weight tensor between CSV and SETN.
    Convert(ConvertArgs),
    /// Inspect the bundled workloads, hardware configs and dataflow styles.
    #[command(subcommand)]
    Presets(PresetsCommand),
}

#[derive(Debug, Clone, Args)]
#[group(required = true, multiple = false)]
pub struct WorkloadSource {
    /// Workload JSON file.
    #[arg(long)]
    pub workload: Option<PathBuf>,
    /// Bundled workload by name (see `presets list`).
    #[arg(long)]
    pub preset: Option<String>,
}

#[derive(Debug, Clone, Args)]
#[group(required = true, multiple = false)]
pub struct HardwareSource {
    /// Hardware JSON file.
    #[arg(long)]
    pub hw: Option<PathBuf>,
    /// Bundled hardware config by name.
    #[arg(long)]
    pub hw_preset: Option<String>,
}

#[derive(Debug, Args)]
pub struct CompressArgs {
    #[command(flatten)]
    pub workload: WorkloadSource,
    /// Directory holding `<layer>.setn` files. Without it, weights are drawn
    /// uniformly from [-1, 1) using `--seed`.
    #[arg(long)]
    pub weights: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub rank: Option<usize>,
    #[arg(long)]
    pub n_p: Option<usize>,
    #[arg(long)]
    pub theta_v: Option<f64>,
    #[arg(long)]
    pub theta_c: Option<f64>,
    #[arg(long)]
    pub tol: Option<f64>,
    #[arg(long)]
    pub max_iter: Option<usize>,
    #[arg(long)]
    pub slice_rows: Option<usize>,
    #[arg(long)]
    pub fc_cols: Option<usize>,
    /// Dense reference precision; defaults to each layer's weight precision.
    #[arg(long)]
    pub bits_ref: Option<u32>,
    #[arg(long, default_value_t = 4)]
    pub bits_ce: u32,
    #[arg(long, default_value_t = 8)]
    pub bits_basis: u32,
    /// Write the statistics only, without the per-layer form files.
    #[arg(long)]
    pub stats_only: bool,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ModelArgs {
    #[command(flatten)]
    pub workload: WorkloadSource,
    #[command(flatten)]
    pub hardware: HardwareSource,
    /// Dataflow style preset applied to every layer.
    #[arg(long, conflicts_with = "dataflow")]
    pub style: Option<String>,
    /// Explicit dataflow encoding; only for single-layer workloads.
    #[arg(long)]
    pub dataflow: Option<String>,
    /// `stats.json` written by `compress`.
    #[arg(long)]
    pub stats: Option<PathBuf>,
    #[arg(long, default_value_t = 0.0)]
    pub skip_fraction: f64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    Exhaustive,
    Pruned,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ObjectiveArg {
    Energy,
    Latency,
    Edp,
}

#[derive(Debug, Args)]
pub struct DseArgs {
    #[command(flatten)]
    pub workload: WorkloadSource,
    #[command(flatten)]
    pub hardware: HardwareSource,
    #[arg(long, value_enum, default_value_t = ModeArg::Pruned)]
    pub mode: ModeArg,
    #[arg(long, value_enum, default_value_t = ObjectiveArg::Energy)]
    pub objective: ObjectiveArg,
    /// Minimum throughput in GOP/s.
    #[arg(long)]
    pub th_min: Option<f64>,
    /// Maximum latency in cycles.
    #[arg(long)]
    pub l_max: Option<f64>,
    /// Apply `--th-min` and `--l-max` to each layer rather than the whole workload.
    #[arg(long)]
    pub per_layer: bool,
    #[arg(long)]
    pub max_candidates: Option<u64>,
    #[arg(long)]
    pub stats: Option<PathBuf>,
    #[arg(long, default_value_t = 0.0)]
    pub skip_fraction: f64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ConvertArgs {
    /// Source file (`.csv` or `.setn`).
    pub input: PathBuf,
    /// Destination file; the other format.
    pub output: PathBuf,
}

#[derive(Debug, Subcommand)]
pub enum PresetsCommand {
    List,
    Show { name: String },
}
