use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use neu_core::harness::{BacktestMethod, SimMethod, Target};
use neu_core::Family;

#[derive(Debug, Parser)]
#[command(name = "neu", version, about = "Learnable reconfigurations of the data space around classical learners")]
pub struct Cli {
    #[command(flatten)]
    pub global: Global,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct Global {
    /// Master seed
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// JSON file merged over the flag values
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory
    #[arg(long, global = true, default_value = "out")]
    pub out: PathBuf,
    /// Worker threads [default: available cores]
    #[arg(long, global = true, value_parser = clap::value_parser!(u16).range(1..))]
    pub threads: Option<u16>,
    /// Table format
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
    /// Record wall-clock timings in tables and the manifest
    #[arg(long, global = true)]
    pub timings: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FamilyArg {
    Rdr,
    MicroBump,
}

impl From<FamilyArg> for Family {
    fn from(f: FamilyArg) -> Self {
        match f {
            FamilyArg::Rdr => Family::Rdr,
            FamilyArg::MicroBump => Family::MicroBump,
        }
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Small demonstrations
    #[command(subcommand)]
    Demo(DemoCommand),
    /// Fit a regression on a CSV whose response is one column
    Fit(FitArgs),
    /// Principal components table
    Pca(PcaArgs),
    /// PCA, kernel PCA and their upgraded versions
    NeuPca(PcaArgs),
    /// Simulation study against p-splines and LOESS
    SimStudy(SimArgs),
    /// Rolling-window hedge backtest on a price table
    Backtest(BacktestArgs),
    /// Build and verify a chain moving sources onto targets
    UrpCheck(UrpArgs),
}

#[derive(Debug, Subcommand)]
pub enum DemoCommand {
    /// Apply or invert a chain on a CSV of points
    Reconfigure(ReconfigureArgs),
}

#[derive(Debug, Args)]
pub struct ReconfigureArgs {
    /// Points CSV with a header row
    #[arg(long)]
    pub points: PathBuf,
    /// Chain JSON; a random chain around the points is drawn when absent
    #[arg(long)]
    pub chain: Option<PathBuf>,
    /// Apply the inverse chain
    #[arg(long)]
    pub invert: bool,
    /// Family of the random chain
    #[arg(long, value_enum, default_value_t = FamilyArg::Rdr)]
    pub family: FamilyArg,
    /// Length of the random chain
    #[arg(long, default_value_t = 5)]
    pub steps: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FitMethod {
    NeuOls,
    Ols,
    Ridge,
    Lasso,
    Enet,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    #[arg(value_enum)]
    pub method: FitMethod,
    /// Data CSV with a header row
    #[arg(long)]
    pub data: PathBuf,
    /// Response column [default: last column]
    #[arg(long)]
    pub response: Option<String>,
    /// Penalty grid
    #[arg(long, value_delimiter = ',', default_value = "0.0001,0.001,0.01,0.1,1")]
    pub lambda: Vec<f64>,
    /// Mixing grid (0 is LASSO, 1 is Ridge)
    #[arg(long, value_delimiter = ',', default_value = "0,0.5,1")]
    pub alpha: Vec<f64>,
    /// Fraction of trailing rows used for validation
    #[arg(long, default_value_t = 0.2)]
    pub validation: f64,
    /// Deformation family (neu-ols)
    #[arg(long, value_enum, default_value_t = FamilyArg::Rdr)]
    pub family: FamilyArg,
    /// Search iterations (neu-ols)
    #[arg(long, default_value_t = 50)]
    pub max_iters: usize,
    /// Proposals per iteration (neu-ols)
    #[arg(long, default_value_t = 50)]
    pub proposals: usize,
}

#[derive(Debug, Args)]
pub struct PcaArgs {
    /// Data CSV; synthetic yield curves when absent
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Days of synthetic yield curves
    #[arg(long, default_value_t = 500)]
    pub days: usize,
    /// Largest factor count
    #[arg(long, default_value_t = 4)]
    pub k_max: usize,
    /// Training rows
    #[arg(long, default_value_t = 300)]
    pub train: usize,
    /// Validation rows
    #[arg(long, default_value_t = 100)]
    pub validation: usize,
    /// Test rows
    #[arg(long, default_value_t = 100)]
    pub test: usize,
    /// Search iterations (neu-pca)
    #[arg(long, default_value_t = 10)]
    pub max_iters: usize,
    /// Proposals per iteration (neu-pca)
    #[arg(long, default_value_t = 30)]
    pub proposals: usize,
    /// Gaussian kernel width [default: median pairwise distance]
    #[arg(long)]
    pub kernel_sigma: Option<f64>,
}

#[derive(Debug, Args)]
pub struct SimArgs {
    /// Target functions
    #[arg(long, value_delimiter = ',', default_value = "m1")]
    pub target: Vec<Target>,
    /// Noise scales
    #[arg(long, value_delimiter = ',', default_value = "0.1")]
    pub sigma: Vec<f64>,
    /// Replicates per target and noise scale
    #[arg(long, default_value_t = 1)]
    pub seeds: usize,
    /// Methods to run
    #[arg(long, value_enum, value_delimiter = ',', default_values_t = [SimMethodArg::NeuOls, SimMethodArg::PSplines, SimMethodArg::Loess])]
    pub methods: Vec<SimMethodArg>,
    /// Sample size
    #[arg(long, default_value_t = 1000)]
    pub n: usize,
    /// Deformation family
    #[arg(long, value_enum, default_value_t = FamilyArg::MicroBump)]
    pub family: FamilyArg,
    /// Bootstrap resamples
    #[arg(long, default_value_t = 1000)]
    pub resamples: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SimMethodArg {
    NeuOls,
    PSplines,
    Loess,
}

impl From<SimMethodArg> for SimMethod {
    fn from(m: SimMethodArg) -> Self {
        match m {
            SimMethodArg::NeuOls => SimMethod::NeuOls,
            SimMethodArg::PSplines => SimMethod::PSplines,
            SimMethodArg::Loess => SimMethod::Loess,
        }
    }
}

#[derive(Debug, Args)]
pub struct BacktestArgs {
    /// Price CSV: date column, target column, then hedging instruments
    #[arg(long)]
    pub prices: PathBuf,
    #[arg(long, default_value_t = 200)]
    pub train_len: usize,
    #[arg(long, default_value_t = 10)]
    pub validation_len: usize,
    #[arg(long, default_value_t = 5)]
    pub test_len: usize,
    #[arg(long, default_value_t = 5)]
    pub stride: usize,
    /// Methods to run
    #[arg(long, value_enum, value_delimiter = ',', default_values_t = [BacktestMethodArg::Ols, BacktestMethodArg::Enet, BacktestMethodArg::NeuOls])]
    pub methods: Vec<BacktestMethodArg>,
    /// Bootstrap resamples
    #[arg(long, default_value_t = 1000)]
    pub resamples: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum BacktestMethodArg {
    Ols,
    Enet,
    NeuOls,
}

impl From<BacktestMethodArg> for BacktestMethod {
    fn from(m: BacktestMethodArg) -> Self {
        match m {
            BacktestMethodArg::Ols => BacktestMethod::Ols,
            BacktestMethodArg::Enet => BacktestMethod::Enet,
            BacktestMethodArg::NeuOls => BacktestMethod::NeuOls,
        }
    }
}

#[derive(Debug, Args)]
pub struct UrpArgs {
    /// Source points CSV
    #[arg(long)]
    pub sources: PathBuf,
    /// Target points CSV, one row per source
    #[arg(long)]
    pub targets: PathBuf,
    /// Points that must stay fixed
    #[arg(long)]
    pub fixed: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = FamilyArg::Rdr)]
    pub family: FamilyArg,
    /// Clearance as a fraction of the smallest pairwise distance
    #[arg(long, default_value_t = 0.25)]
    pub clearance: f64,
}
