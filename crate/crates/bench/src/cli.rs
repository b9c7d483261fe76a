use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use lbvh::CloudKind;

#[derive(Debug, Parser)]
#[command(name = "lbvh-bench", version, about = "Benchmark and verification harness for lbvh")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a synthetic cloud to a PCL3 (binary) or .csv file.
    Generate(GenerateArgs),
    /// Time tree construction and one query batch.
    Bench(BenchArgs),
    /// Repeat `bench` for several thread counts and report speedups.
    Scale(ScaleArgs),
    /// Check query results against brute force.
    Verify(VerifyArgs),
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    /// Cloud as shape:variant.
    #[arg(long, alias = "source", default_value = "cube:filled")]
    pub cloud: CloudKind,
    /// Number of points.
    #[arg(long, alias = "m", value_parser = clap::value_parser!(u64).range(1..))]
    pub count: u64,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Destination; a `.csv` extension selects text output.
    #[arg(long, short)]
    pub output: PathBuf,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum QueryKind {
    Knn,
    Spatial,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Alloc {
    #[value(name = "1p")]
    OnePass,
    #[value(name = "2p")]
    TwoPass,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Switch {
    On,
    Off,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Pretty,
}

/// Experiment description shared by every subcommand except `generate`.
#[derive(Clone, Debug, Args)]
pub struct ExperimentArgs {
    /// Source (indexed) cloud as shape:variant.
    #[arg(long, default_value = "cube:filled")]
    pub source: CloudKind,
    /// Target (query) cloud as shape:variant.
    #[arg(long, default_value = "sphere:filled")]
    pub target: CloudKind,
    /// Number of source points.
    #[arg(long, default_value_t = 10_000)]
    pub m: usize,
    /// Number of target points; defaults to m.
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long, default_value_t = 10)]
    pub k: usize,
    /// Search radius; defaults to the radius holding k filled-cube points on average.
    #[arg(long)]
    pub radius: Option<f32>,
    #[arg(long, value_enum, default_value_t = QueryKind::Spatial)]
    pub kind: QueryKind,
    #[arg(long, value_enum, default_value_t = Alloc::TwoPass)]
    pub alloc: Alloc,
    /// Per-query slots for 1p allocation (required with --alloc 1p).
    #[arg(long)]
    pub buffer_size: Option<usize>,
    #[arg(long, value_enum, default_value_t = Switch::On)]
    pub sort_queries: Switch,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Timed repetitions after one discarded warm-up run.
    #[arg(long, default_value_t = 5)]
    pub reps: usize,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    #[command(flatten)]
    pub experiment: ExperimentArgs,
    /// Worker threads; defaults to all available cores.
    #[arg(long)]
    pub threads: Option<usize>,
}

#[derive(Debug, Args)]
pub struct ScaleArgs {
    #[command(flatten)]
    pub experiment: ExperimentArgs,
    /// Comma-separated thread counts.
    #[arg(long, value_delimiter = ',', default_value = "1,2,4")]
    pub threads: Vec<usize>,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    #[command(flatten)]
    pub experiment: ExperimentArgs,
    #[arg(long)]
    pub threads: Option<usize>,
    /// Break the tree before querying (harness self-test).
    #[arg(long, hide = true)]
    pub corrupt_tree: bool,
}
