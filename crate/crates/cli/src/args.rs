use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use wavefactor::laplacian::BoundaryCondition;

#[derive(Debug, Parser)]
#[command(
    name = "wavefactor",
    version,
    about = "Wave-informed matrix factorization"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a synthetic dataset (Y.csv and, where available, ground truth or mask)
    Generate {
        #[command(subcommand)]
        kind: GenerateKind,
    },
    /// Fit the wave-informed factorization of a data matrix
    Factorize(SolveArgs),
    /// Complete a partially observed data matrix (requires --mask)
    Complete(SolveArgs),
    /// Score a finished run against ground truth and/or a spatial partition
    Evaluate(EvaluateArgs),
    /// Re-run a saved config.json
    Replay { config: PathBuf },
}

#[derive(Debug, Args)]
pub struct OutputArgs {
    /// Output directory (created if missing)
    #[arg(long)]
    pub out: PathBuf,
    /// Also write SVG plots with the CSV data behind them
    #[arg(long)]
    pub plots: bool,
    /// Read and write CSV files with a header row
    #[arg(long)]
    pub header: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Damping {
    None,
    Time,
    Space,
}

#[derive(Debug, Subcommand)]
pub enum GenerateKind {
    /// Standing modes on a fixed string
    String {
        #[arg(long, default_value_t = 10)]
        modes: usize,
        #[arg(long, default_value_t = 200)]
        space: usize,
        #[arg(long, default_value_t = 400)]
        time: usize,
        #[arg(long, default_value_t = 10.0)]
        amplitude: f64,
        #[arg(long, value_enum, default_value_t = Damping::None)]
        damping: Damping,
        #[arg(long, default_value_t = 0.0)]
        noise_var: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Pulse propagating along a line with piecewise wave speed
    Line {
        #[arg(long, default_value_t = 200)]
        space: usize,
        #[arg(long, default_value_t = 400)]
        time: usize,
        /// Segment boundary positions
        #[arg(long, value_delimiter = ',', default_value = "0.4")]
        boundaries: Vec<f64>,
        /// Wavenumber of each segment relative to the first
        #[arg(long, value_delimiter = ',', default_value = "1,4")]
        ratios: Vec<f64>,
        #[arg(long, default_value_t = 1.0)]
        speed: f64,
        #[arg(long, default_value_t = 5.0)]
        frequency: f64,
        #[arg(long, default_value_t = 5.0)]
        bandwidth: f64,
        /// 1 absorbs at the ends, 0 reflects
        #[arg(long, default_value_t = 0.5)]
        loss: f64,
        /// Node spacing [default: 1/space]
        #[arg(long)]
        dl: Option<f64>,
        /// Simulation step [default: 0.8·dl/speed]
        #[arg(long)]
        dt: Option<f64>,
        #[arg(long, default_value_t = 2)]
        record_every: usize,
        #[arg(long, default_value_t = 0.0)]
        noise_var: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Keep only this many uniformly spaced rows observed (writes mask.csv)
        #[arg(long)]
        observe: Option<usize>,
        #[command(flatten)]
        output: OutputArgs,
    },
}

#[derive(Debug, Args)]
pub struct SolveArgs {
    /// Data matrix, space × time
    #[arg(long)]
    pub input: PathBuf,
    /// 0/1 matrix of observed entries
    #[arg(long)]
    pub mask: Option<PathBuf>,
    #[arg(long)]
    pub gamma: f64,
    #[arg(long)]
    pub lambda: f64,
    #[arg(long, default_value_t = 1e-3)]
    pub polar_tol: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = BoundaryCondition::Dirichlet)]
    pub bc: BoundaryCondition,
    #[arg(long, default_value_t = 1.0)]
    pub dl: f64,
    #[arg(long, default_value_t = 1.0)]
    pub dt: f64,
    #[arg(long, default_value_t = 100)]
    pub max_outer: usize,
    #[arg(long, default_value_t = 500)]
    pub max_epochs: usize,
    /// Use LIPO with this many evaluations instead of the grid search
    #[arg(long)]
    pub lipo: Option<usize>,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    /// Directory holding D.csv and X.csv from a previous run
    #[arg(long)]
    pub run: PathBuf,
    /// Ground-truth spatial modes, one per column
    #[arg(long)]
    pub truth: Option<PathBuf>,
    /// Interior region cuts (row indices) for the partitioned energy
    #[arg(long, value_delimiter = ',')]
    pub cuts: Vec<usize>,
    /// Number of highest-energy columns to partition
    #[arg(long, default_value_t = 10)]
    pub top: usize,
    /// Report directory [default: the run directory]
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub plots: bool,
    #[arg(long)]
    pub header: bool,
}
