use std::path::PathBuf;

use cc_ik_core::Method;
use clap::{Args, Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(name = "cc-ik", version, about = "Inverse kinematics for constant-curvature continuum manipulators")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve one target read from a TOML input file.
    Solve(SolveArgs),
    /// Run the built-in four-segment scenario from three starts.
    Demo(DemoArgs),
    /// Run a randomized benchmark and write trials.csv and summary.json.
    Bench(BenchArgs),
    /// Sample the reachable workspace and overlay failed benchmark targets.
    Workspace(WorkspaceArgs),
}

/// Overrides for solver options. Flags win over the config file.
#[derive(Debug, Clone, Default, Args)]
pub struct SolverFlags {
    /// Step factor β.
    #[arg(long)]
    pub beta: Option<f64>,
    /// DLS damping λ.
    #[arg(long)]
    pub lambda: Option<f64>,
    /// Initial VVL length as a fraction of the nominal length.
    #[arg(long = "vvl-factor")]
    pub vvl_factor: Option<f64>,
}

#[derive(Debug, Args)]
pub struct SolveArgs {
    /// TOML file with a [target] table and optional [solver] table.
    #[arg(long, short)]
    pub input: PathBuf,
    #[arg(long)]
    pub method: Option<Method>,
    #[arg(long)]
    pub tol: Option<f64>,
    #[arg(long = "max-iter")]
    pub max_iter: Option<usize>,
    /// Segment count for pose targets (nominal length 1 each) when the file
    /// gives no nominal_lengths.
    #[arg(long)]
    pub segments: Option<usize>,
    /// Also write trajectory.json.
    #[arg(long)]
    pub trajectory: bool,
    #[command(flatten)]
    pub solver: SolverFlags,
    #[arg(long = "out-dir", default_value = ".")]
    pub out_dir: PathBuf,
}

#[derive(Debug, Args)]
pub struct DemoArgs {
    /// TOML file with an optional [solver] table.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub tol: Option<f64>,
    #[arg(long = "max-iter")]
    pub max_iter: Option<usize>,
    #[command(flatten)]
    pub solver: SolverFlags,
    #[arg(long = "out-dir", default_value = ".")]
    pub out_dir: PathBuf,
}

/// Benchmark grid overrides; lists are comma separated.
#[derive(Debug, Clone, Default, Args)]
pub struct GridFlags {
    /// Methods to run.
    #[arg(long = "method", value_delimiter = ',')]
    pub methods: Vec<Method>,
    /// Segment counts.
    #[arg(long, value_delimiter = ',')]
    pub segments: Vec<usize>,
    /// Trials per (method, segments, limit, tolerance) cell.
    #[arg(long)]
    pub trials: Option<usize>,
    /// Iteration limits.
    #[arg(long = "max-iter", value_delimiter = ',')]
    pub max_iter: Vec<usize>,
    /// Convergence tolerances.
    #[arg(long, value_delimiter = ',')]
    pub tol: Vec<f64>,
    /// Largest sampled bending angle per segment.
    #[arg(long = "theta-max")]
    pub theta_max: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    /// TOML file with optional [bench] and [solver] tables.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Start from the full protocol grid (5 limits × 3 tolerances) instead of
    /// the single-cell desk-scale grid.
    #[arg(long = "full-grid")]
    pub full_grid: bool,
    #[command(flatten)]
    pub grid: GridFlags,
    #[command(flatten)]
    pub solver: SolverFlags,
    #[arg(long = "out-dir", default_value = ".")]
    pub out_dir: PathBuf,
}

#[derive(Debug, Args)]
pub struct WorkspaceArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Number of reachable-cloud samples per segment count.
    #[arg(long)]
    pub samples: Option<usize>,
    #[command(flatten)]
    pub grid: GridFlags,
    #[command(flatten)]
    pub solver: SolverFlags,
    #[arg(long = "out-dir", default_value = ".")]
    pub out_dir: PathBuf,
}
