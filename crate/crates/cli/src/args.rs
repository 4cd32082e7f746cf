use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "roadclust", version, about = "Cluster weekly road speed profiles with DTW K-Means")]
pub struct Cli {
    /// Worker threads (default: available cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// JSON file setting any flag by its long name (dashes become
    /// underscores); flags given on the command line win.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic records/attributes/labels triple.
    Synth(SynthArgs),
    /// Ingest and clean records into a dataset snapshot.
    Ingest(DataArgs),
    /// Fit DTW K-Means.
    Cluster(ClusterArgs),
    /// Fit a range of k and pick the elbow of the inertia curve.
    Elbow(ElbowArgs),
    /// Fill missing buckets from cluster peers.
    Impute(ImputeArgs),
    /// Assign congestion levels and tile colors.
    Colorify(ColorifyArgs),
    /// Find secondary roads that behave like primary roads.
    ImportantRoads(ImportantArgs),
    /// DTW distance between two series.
    Dtw(DtwArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Preset {
    /// Residential, arterial and highway streets.
    Default,
    /// Primary highways, ordinary secondaries and planted primary-like
    /// secondaries.
    ImportantRoads,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub bucket_minutes: Option<u32>,
    #[arg(long, value_enum)]
    pub preset: Option<Preset>,
    /// JSON list of archetype specs, replacing the preset.
    #[arg(long)]
    pub specs: Option<PathBuf>,
}

#[derive(Debug, Args, Default)]
pub struct DataArgs {
    /// Records CSV, or a dataset JSON written by `ingest`.
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// Attributes CSV joined by street id.
    #[arg(long)]
    pub attrs: Option<PathBuf>,
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
    #[arg(long)]
    pub min_filling_rate: Option<f64>,
    #[arg(long)]
    pub bucket_minutes: Option<u32>,
    /// Time zone for timestamps without an offset.
    #[arg(long)]
    pub tz: Option<String>,
}

#[derive(Debug, Args, Default)]
pub struct KMeansArgs {
    #[arg(long)]
    pub max_iter: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct ClusterArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub kmeans: KMeansArgs,
    #[arg(long)]
    pub k: Option<usize>,
}

#[derive(Debug, Args)]
pub struct ElbowArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub kmeans: KMeansArgs,
    /// Inclusive range of k, e.g. `1..6`.
    #[arg(long = "k")]
    pub k_range: Option<String>,
}

#[derive(Debug, Args)]
pub struct ImputeArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub kmeans: KMeansArgs,
    #[arg(long)]
    pub k: Option<usize>,
    /// Model JSON from `cluster`; fit one when absent.
    #[arg(long)]
    pub model: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ColorifyArgs {
    #[command(flatten)]
    pub imputation: ImputeArgs,
    /// Congestion thresholds as free:heavy:blocked.
    #[arg(long)]
    pub thresholds: Option<String>,
    /// Bucket rendered into the tile snapshot.
    #[arg(long)]
    pub snapshot_bucket: Option<usize>,
    /// Color observed cells only.
    #[arg(long)]
    pub no_impute: bool,
}

#[derive(Debug, Args)]
pub struct ImportantArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub kmeans: KMeansArgs,
    #[arg(long)]
    pub k: Option<usize>,
    /// Also partition with this k and report both.
    #[arg(long)]
    pub compare_k: Option<usize>,
    /// Run an elbow check over this range of k on the secondary roads.
    #[arg(long)]
    pub elbow_range: Option<String>,
    /// Weight of the scalar-feature term.
    #[arg(long)]
    pub feature_weight: Option<f64>,
}

#[derive(Debug, Args)]
pub struct DtwArgs {
    /// Comma-separated series, or `@path` to read it from a file.
    #[arg(long, allow_hyphen_values = true)]
    pub a: String,
    #[arg(long, allow_hyphen_values = true)]
    pub b: String,
    /// Local cost: abs or sq.
    #[arg(long)]
    pub local: Option<String>,
    /// Sakoe-Chiba band half-width.
    #[arg(long)]
    pub window: Option<usize>,
    /// Print the warping path as well.
    #[arg(long)]
    pub path: bool,
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
}
