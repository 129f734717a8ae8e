use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

/// Bayesian simultaneous quantile regression with monotone spline CDFs.
///
/// Every flag can also be set through an environment variable named
/// QUINN_<FLAG> (upper case, dashes as underscores) or through a
/// `key = value` file passed with --config. Flags win over the
/// environment, which wins over the file.
#[derive(Debug, Parser, Serialize)]
#[command(name = "quinn", version)]
pub struct Cli {
    /// Key-value configuration file.
    #[arg(long, global = true, env = "QUINN_CONFIG")]
    pub config: Option<PathBuf>,

    /// Worker thread cap for chains, grid cells and replicates.
    #[arg(long, global = true, env = "QUINN_THREADS")]
    pub threads: Option<usize>,

    /// Log progress to stderr (repeat for more detail).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    #[serde(skip)]
    pub verbose: u8,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Command {
    /// Fit a model (or a WAIC grid of models) to a CSV data set.
    Fit(FitArgs),
    /// Predict quantiles for new covariate rows.
    Predict(PredictArgs),
    /// Accumulated local effects of one covariate or a pair.
    Ale(AleArgs),
    /// Variable importance of all main effects (and pairs).
    Vi(ViArgs),
    /// Convergence diagnostics of a fitted run.
    Diagnose(DiagnoseArgs),
    /// Simulate benchmark data, optionally running the replicate study.
    Simulate(SimulateArgs),
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SamplerArgs {
    /// Total iterations per chain, warmup included.
    #[arg(long, env = "QUINN_ITERS", default_value_t = 4000)]
    pub iters: usize,
    #[arg(long, env = "QUINN_WARMUP", default_value_t = 1000)]
    pub warmup: usize,
    /// Keep every n-th post-warmup draw.
    #[arg(long, env = "QUINN_THIN", default_value_t = 5)]
    pub thin: usize,
    #[arg(long, env = "QUINN_CHAINS", default_value_t = 4)]
    pub chains: usize,
    #[arg(long, env = "QUINN_SEED", default_value_t = 0)]
    pub seed: u64,
    #[arg(long, env = "QUINN_TARGET_ACCEPT", default_value_t = 0.8)]
    pub target_accept: f64,
    #[arg(long, env = "QUINN_MAX_DEPTH", default_value_t = 10)]
    pub max_depth: usize,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct ModelArgs {
    /// Interior knot counts p (comma separated for a WAIC grid).
    #[arg(long = "p", env = "QUINN_P", value_delimiter = ',', default_value = "5")]
    pub p: Vec<usize>,
    /// Hidden widths V (comma separated for a WAIC grid).
    #[arg(long = "V", env = "QUINN_V", value_delimiter = ',', default_value = "5")]
    pub v: Vec<usize>,
    /// Spline degree r.
    #[arg(long, env = "QUINN_DEGREE", default_value_t = 2)]
    pub degree: usize,
    /// Scale of the half-normal priors on the weight scales.
    #[arg(long, env = "QUINN_PRIOR_SCALE", default_value_t = 30.0)]
    pub prior_scale: f64,
    /// Padding of the response range on each side, as a fraction of it.
    #[arg(long, env = "QUINN_MARGIN", default_value_t = 0.05)]
    pub margin: f64,
}

#[derive(Debug, Args, Serialize)]
pub struct FitArgs {
    /// Training CSV (header required, numeric cells only).
    #[arg(long, env = "QUINN_DATA")]
    pub data: PathBuf,
    /// Name of the response column; every other column is a covariate.
    #[arg(long, env = "QUINN_RESPONSE")]
    pub response: String,
    /// Run directory to create.
    #[arg(long, env = "QUINN_OUT")]
    pub out: PathBuf,
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub sampler: SamplerArgs,
}

#[derive(Debug, Args, Serialize)]
pub struct PredictArgs {
    /// Run directory written by `fit`.
    #[arg(long, env = "QUINN_FIT")]
    pub fit: PathBuf,
    /// CSV with the covariate columns used for fitting.
    #[arg(long, env = "QUINN_QUERY")]
    pub query: PathBuf,
    #[arg(long, env = "QUINN_TAUS", value_delimiter = ',', default_value = "0.05,0.25,0.5,0.75,0.95")]
    pub taus: Vec<f64>,
    /// Also write pointwise posterior bands at this credibility level.
    #[arg(long, env = "QUINN_BANDS")]
    pub bands: Option<f64>,
    /// Points of the response grid used to invert the CDF.
    #[arg(long, env = "QUINN_GRID", default_value_t = 512)]
    pub grid: usize,
    #[arg(long, env = "QUINN_OUT")]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct EffectArgs {
    /// Run directory written by `fit`.
    #[arg(long, env = "QUINN_FIT")]
    pub fit: PathBuf,
    /// CSV holding the covariates the effects are averaged over (usually
    /// the training data).
    #[arg(long, env = "QUINN_DATA")]
    pub data: PathBuf,
    #[arg(long, env = "QUINN_TAUS", value_delimiter = ',', default_value = "0.1,0.5,0.9")]
    pub taus: Vec<f64>,
    /// Bins per covariate (default 40 for main effects, 20 per axis for pairs).
    #[arg(long, env = "QUINN_BINS")]
    pub bins: Option<usize>,
    /// Number of evenly spaced posterior draws for the bands (0 = all).
    #[arg(long, env = "QUINN_DRAWS", default_value_t = 100)]
    pub draws: usize,
    /// Covariates to treat as categorical (comma separated names).
    #[arg(long, env = "QUINN_CATEGORICAL", value_delimiter = ',')]
    pub categorical: Vec<String>,
    #[arg(long, env = "QUINN_GRID", default_value_t = 512)]
    pub grid: usize,
    #[arg(long, env = "QUINN_OUT")]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct AleArgs {
    /// Covariate name.
    #[arg(long, env = "QUINN_COVARIATE")]
    pub covariate: String,
    /// Second covariate for joint and interaction effects.
    #[arg(long, env = "QUINN_PAIR")]
    pub pair: Option<String>,
    #[command(flatten)]
    pub effect: EffectArgs,
}

#[derive(Debug, Args, Serialize)]
pub struct ViArgs {
    /// Also score the interaction of every pair of continuous covariates.
    #[arg(long, env = "QUINN_PAIRS")]
    pub pairs: bool,
    #[command(flatten)]
    pub effect: EffectArgs,
}

#[derive(Debug, Args, Serialize)]
pub struct DiagnoseArgs {
    /// Run directory written by `fit`.
    #[arg(long, env = "QUINN_FIT")]
    pub fit: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct SimulateArgs {
    /// Design number 1 to 4.
    #[arg(long, env = "QUINN_DESIGN")]
    pub design: u32,
    #[arg(long, env = "QUINN_N")]
    pub n: usize,
    #[arg(long, env = "QUINN_REPS", default_value_t = 1)]
    pub reps: usize,
    /// Covariate count for design 4 (10, 20 or 40).
    #[arg(long, env = "QUINN_D")]
    pub d: Option<usize>,
    /// Output directory.
    #[arg(long, env = "QUINN_OUT")]
    pub out: PathBuf,
    /// Fit every replicate over the p x V grid and score it against the
    /// true quantiles.
    #[arg(long, env = "QUINN_STUDY")]
    pub study: bool,
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub sampler: SamplerArgs,
}
