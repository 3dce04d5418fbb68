use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use decorr::autotune::DEFAULT_BURN_IN;
use decorr::detector::{DEFAULT_GAMMA, RECOMMENDED_ETAS, RECOMMENDED_WINDOWS};
use decorr::synth::DEFAULT_COV_WINDOW;
use decorr::tuning::{DEFAULT_BINS, DEFAULT_RATIOS};
use serde::{Deserialize, Serialize};

/// Environment variable naming the default output directory.
pub const OUTPUT_DIR_ENV: &str = "DECORR_OUTPUT_DIR";

#[derive(Debug, Parser)]
#[command(name = "decorr", version, about = "Streaming decorrelation anomaly detection")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Subcommand, Serialize, Deserialize)]
#[serde(tag = "command", rename_all = "kebab-case")]
pub enum Command {
    /// Generate synthetic scenarios as labeled CSV files.
    Generate(GenerateArgs),
    /// Score a CSV stream row by row.
    Score(ScoreArgs),
    /// Select a validation subset and grid-search hyperparameters on it.
    Tune(TuneArgs),
    /// Evaluate detector configurations over a directory of datasets.
    Bench(BenchArgs),
    /// Re-run a command from a manifest written by an earlier run.
    #[serde(skip)]
    Replay(ReplayArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScenarioKind {
    /// Random covariance `A Aᵀ`; the window uses a different seed.
    RandomCov,
    /// Equicorrelated features; the window uses a different strength.
    Corr,
    /// Random covariance; the window shifts the mean.
    MeanShift,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct GenerateArgs {
    /// Emit the 12 low-dimensional plus 8 high-dimensional scenario suite.
    #[arg(long, conflicts_with = "kind")]
    pub suite: bool,

    /// Single-scenario generator.
    #[arg(long, value_enum)]
    pub kind: Option<ScenarioKind>,

    /// Master seed (suite) or background seed (single scenario).
    #[arg(long, default_value_t = 0)]
    pub seed: u64,

    /// Samples per scenario.
    #[arg(long, default_value_t = 50_000)]
    pub m: usize,

    /// Features of a single scenario.
    #[arg(long, default_value_t = 2)]
    pub d: usize,

    /// Background correlation strength (`--kind corr`).
    #[arg(long, default_value_t = 0.1)]
    pub s: f64,

    /// Window correlation strength (`--kind corr`); defaults to 0.9 for a
    /// weak background and 0.05 for a strong one.
    #[arg(long)]
    pub anomaly_s: Option<f64>,

    /// Seed of the window generator; defaults to `seed + 1`.
    #[arg(long)]
    pub anomaly_seed: Option<u64>,

    /// First anomalous row; defaults to the middle of the stream.
    #[arg(long)]
    pub start: Option<usize>,

    /// Anomalous rows.
    #[arg(long, default_value_t = 100)]
    pub length: usize,

    /// Mean shift in background standard deviations (`--kind mean-shift`).
    #[arg(long, default_value_t = 3.0)]
    pub shift_sigmas: f64,

    /// Base file name of a single scenario.
    #[arg(long, default_value = "scenario")]
    pub name: String,

    /// Also write sliding-covariance and mean-correlation CSVs.
    #[arg(long)]
    pub cov_diag: bool,

    /// Block size of the sliding covariance.
    #[arg(long, default_value_t = DEFAULT_COV_WINDOW)]
    pub wc: usize,

    /// Output directory.
    #[arg(short, long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct ScoreArgs {
    /// Input CSV (header row; optional final `label` column).
    pub input: PathBuf,

    /// Fixed learning rate.
    #[arg(long, required_unless_present = "auto", conflicts_with = "auto")]
    pub eta: Option<f64>,

    /// Select the learning rate with the burn-in race.
    #[arg(long)]
    pub auto: bool,

    /// Momentum factor.
    #[arg(long, default_value_t = DEFAULT_GAMMA)]
    pub gamma: f64,

    /// Past samples per update (fixed learning rate only).
    #[arg(long, default_value_t = 0)]
    pub window: usize,

    /// Burn-in length for `--auto`.
    #[arg(long, default_value_t = DEFAULT_BURN_IN)]
    pub burn_in: usize,

    /// Candidate learning rates for `--auto`.
    #[arg(long, value_delimiter = ',', default_values_t = RECOMMENDED_ETAS.to_vec())]
    pub grid: Vec<f64>,

    /// Add ‖R‖_F and per-feature column norms to every row.
    #[arg(long)]
    pub diagnostics: bool,

    /// Output CSV; defaults to `<input stem>_scores.csv` in the output
    /// directory.
    #[arg(short, long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct GridArgs {
    /// Learning rates of the grid.
    #[arg(long, value_delimiter = ',', default_values_t = RECOMMENDED_ETAS.to_vec())]
    pub grid: Vec<f64>,

    /// Window sizes of the grid.
    #[arg(long, value_delimiter = ',', default_values_t = RECOMMENDED_WINDOWS.to_vec())]
    pub windows: Vec<usize>,

    /// Momentum factor.
    #[arg(long, default_value_t = DEFAULT_GAMMA)]
    pub gamma: f64,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct SubsetArgs {
    /// Downsampling ratios tried for the validation subset.
    #[arg(long, value_delimiter = ',', default_values_t = DEFAULT_RATIOS.to_vec())]
    pub ratios: Vec<f64>,

    /// Histogram bins per feature.
    #[arg(long, default_value_t = DEFAULT_BINS)]
    pub bins: usize,

    /// Seed of the downsampler.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct TuneArgs {
    /// Labeled input CSV.
    pub input: PathBuf,

    #[command(flatten)]
    pub subset: SubsetArgs,

    #[command(flatten)]
    pub grid: GridArgs,

    /// Output directory.
    #[arg(short, long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct BenchArgs {
    /// Directory of labeled CSV datasets.
    pub dataset_dir: PathBuf,

    /// Tune on a representative subset, then score the full dataset.
    #[arg(long)]
    pub tuned: bool,

    /// Report the best configuration of this learning-rate grid per dataset
    /// (the default method). Bare `--grid` uses the recommended grid.
    #[arg(long, value_delimiter = ',', num_args = 0..=1, require_equals = true)]
    pub grid: Option<Vec<f64>>,

    /// Window sizes of the grid.
    #[arg(long, value_delimiter = ',', default_values_t = RECOMMENDED_WINDOWS.to_vec())]
    pub windows: Vec<usize>,

    /// Momentum factor of every method.
    #[arg(long, default_value_t = DEFAULT_GAMMA)]
    pub gamma: f64,

    /// Fixed learning rates, one method each.
    #[arg(long, value_delimiter = ',')]
    pub eta: Vec<f64>,

    /// Window size used with `--eta`.
    #[arg(long, default_value_t = 0)]
    pub window: usize,

    /// Automatic learning-rate selection.
    #[arg(long)]
    pub auto: bool,

    /// Burn-in length for `--auto`.
    #[arg(long, default_value_t = DEFAULT_BURN_IN)]
    pub burn_in: usize,

    #[command(flatten)]
    pub subset: SubsetArgs,

    /// Directory laid out as `<method>/<dataset>.csv` with `index,score` rows.
    #[arg(long)]
    pub external_scores: Option<PathBuf>,

    /// Scoring repeats per cell for wall-clock measurement.
    #[arg(long, default_value_t = 1)]
    pub repeats: usize,

    /// Worker threads; defaults to the number of CPUs.
    #[arg(long)]
    pub jobs: Option<usize>,

    /// Output directory.
    #[arg(short, long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct ReplayArgs {
    /// Manifest JSON written by an earlier run.
    pub manifest: PathBuf,

    /// Write outputs here instead of the recorded location.
    #[arg(short, long)]
    pub output: Option<PathBuf>,
}
