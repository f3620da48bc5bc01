use std::path::PathBuf;

use bayesmooth::estimator::{FitConfig, Method, Mode, ModelKind};
use bayesmooth::model::GlobalTrendKind;
use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(
    name = "bayesmooth",
    version,
    about = "Bayesian exponential smoothing: fit, predict, backtest"
)]
pub struct Cli {
    /// Worker threads (defaults to the number of CPUs).
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    /// File of key=value lines mirroring the long flags; flags override it.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit a model to a CSV series and write an artifact.
    #[command(args_override_self = true)]
    Fit(FitArgs),
    /// Forecast from an artifact.
    #[command(args_override_self = true)]
    Predict(PredictArgs),
    /// Expanding-window SMAPE backtest over one file or a directory of files.
    #[command(args_override_self = true)]
    Backtest(BacktestArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModelArg {
    Lgt,
    Dlt,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum BacktestModelArg {
    Lgt,
    Dlt,
    Naive,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    Additive,
    Multiplicative,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum TrendArg {
    Flat,
    Linear,
    Loglinear,
    Logistic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MethodArg {
    Map,
    Mcmc,
}

/// Options shared by `fit` and `backtest`.
#[derive(Debug, Clone, Args)]
pub struct ModelOpts {
    /// Seasonal period (1 disables seasonality).
    #[arg(long, default_value_t = 1)]
    pub period: usize,

    #[arg(long, value_enum, default_value_t = ModeArg::Additive)]
    pub mode: ModeArg,

    /// Global trend of the damped local trend model.
    #[arg(long, value_enum, default_value_t = TrendArg::Linear)]
    pub global_trend: TrendArg,

    #[arg(long, value_enum, default_value_t = MethodArg::Map)]
    pub method: MethodArg,

    #[arg(long, default_value_t = 0)]
    pub seed: u64,

    /// MAP restarts.
    #[arg(long, default_value_t = 4)]
    pub restarts: usize,

    /// MCMC chains.
    #[arg(long, default_value_t = 4)]
    pub chains: usize,

    /// MCMC warmup iterations per chain.
    #[arg(long, default_value_t = 1000)]
    pub warmup: usize,

    /// MCMC retained draws per chain.
    #[arg(long, default_value_t = 1000)]
    pub draws: usize,
}

impl ModelOpts {
    pub fn fit_config(&self, model: ModelArg) -> FitConfig {
        let trend = match self.global_trend {
            TrendArg::Flat => GlobalTrendKind::Flat,
            TrendArg::Linear => GlobalTrendKind::Linear,
            TrendArg::Loglinear => GlobalTrendKind::LogLinear,
            TrendArg::Logistic => GlobalTrendKind::Logistic,
        };
        FitConfig {
            model: match model {
                ModelArg::Lgt => ModelKind::Lgt,
                ModelArg::Dlt => ModelKind::Dlt { trend },
            },
            mode: match self.mode {
                ModeArg::Additive => Mode::Additive,
                ModeArg::Multiplicative => Mode::Multiplicative,
            },
            method: match self.method {
                MethodArg::Map => Method::Map {
                    restarts: self.restarts,
                },
                MethodArg::Mcmc => Method::Mcmc {
                    chains: self.chains,
                    warmup: self.warmup,
                    draws: self.draws,
                },
            },
            seed: self.seed,
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct FitArgs {
    #[arg(long, value_enum)]
    pub model: ModelArg,

    /// CSV with columns ds, y and optional regressors.
    #[arg(long)]
    pub input: PathBuf,

    #[command(flatten)]
    pub opts: ModelOpts,

    /// Artifact path.
    #[arg(long)]
    pub output: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct PredictArgs {
    /// Artifact written by `fit`.
    #[arg(long)]
    pub model: PathBuf,

    #[arg(long)]
    pub horizon: usize,

    /// Quantile levels in [0, 1], comma separated.
    #[arg(long, value_delimiter = ',', default_value = "0.05,0.5,0.95")]
    pub quantiles: Vec<f64>,

    /// Simulated paths.
    #[arg(long, default_value_t = 1000)]
    pub paths: usize,

    /// Simulation seed (defaults to the seed stored in the artifact).
    #[arg(long)]
    pub seed: Option<u64>,

    /// CSV of future regressor values, one row per step.
    #[arg(long)]
    pub regressors: Option<PathBuf>,

    /// Output file (standard output if omitted).
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct BacktestArgs {
    #[arg(long, value_enum)]
    pub model: BacktestModelArg,

    /// A CSV file or a directory of CSV files (one series each).
    #[arg(long)]
    pub input: PathBuf,

    #[command(flatten)]
    pub opts: ModelOpts,

    /// Forecast horizon.
    #[arg(long = "h")]
    pub horizon: usize,

    #[arg(long, default_value_t = 1)]
    pub splits: usize,

    /// Distance between training-window ends (defaults to the horizon).
    #[arg(long)]
    pub step: Option<usize>,

    /// Minimum training length (defaults to max(2 * period, 3)).
    #[arg(long)]
    pub min_train: Option<usize>,

    /// JSON report path.
    #[arg(long)]
    pub output: Option<PathBuf>,

    /// CSV table of per-series scores.
    #[arg(long)]
    pub table: Option<PathBuf>,
}
