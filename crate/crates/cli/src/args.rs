use std::path::PathBuf;

use anglerank::{MixtureInit, PlugIn};
use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::io::DataKind;

pub const DEFAULT_SEED: u64 = 20_240_607;

#[derive(Debug, Parser)]
#[command(name = "anglerank", version, about = "Angle-based ranking models: fitting, mixtures, sampling and evaluation")]
pub struct Cli {
    /// Worker threads for parallel sections; defaults to all cores.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Log progress to standard error (repeat for more detail).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit a single-population model to complete rankings.
    Fit(FitArgs),
    /// Fit a variational mixture with a fixed number of clusters.
    FitMixture(MixtureArgs),
    /// Fit mixtures over a range of cluster counts and report DIC.
    SelectClusters(SelectArgs),
    /// Fit to subset or top-k rankings by Gibbs imputation.
    FitIncomplete(IncompleteArgs),
    /// Draw rankings from a model.
    Sample(SampleArgs),
    /// Per-row log predictive density under a fitted model.
    Predict(ModelDataArgs),
    /// Per-row cluster assignment under a fitted mixture.
    Classify(ModelDataArgs),
    /// Compare fitted models.
    #[command(subcommand)]
    Evaluate(Evaluate),
    /// Relative error of the approximate normalizing constant.
    NcError(NcErrorArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Method {
    Mle,
    Vi,
    Sir,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum BackendKind {
    Vi,
    Sir,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum InitArg {
    Seeded,
    Uniform,
    Random,
}

impl From<InitArg> for MixtureInit {
    fn from(v: InitArg) -> Self {
        match v {
            InitArg::Seeded => MixtureInit::Seeded,
            InitArg::Uniform => MixtureInit::Uniform,
            InitArg::Random => MixtureInit::Random,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PlugInArg {
    Mean,
    Draw,
}

impl From<PlugInArg> for PlugIn {
    fn from(v: PlugInArg) -> Self {
        match v {
            PlugInArg::Mean => PlugIn::Mean,
            PlugInArg::Draw => PlugIn::Draw,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum KldMethodArg {
    Exact,
    Mc,
}

#[derive(Debug, Args)]
pub struct DataArgs {
    /// CSV of ranks per item, one ranking per row, optional header.
    #[arg(long, visible_alias = "data")]
    pub data_file: PathBuf,
}

#[derive(Debug, Args)]
pub struct PriorArgs {
    /// Prior mean direction, one value per line.
    #[arg(long)]
    pub prior_m0_file: Option<PathBuf>,
    /// Prior concentration weight on the mean direction.
    #[arg(long)]
    pub prior_beta0: Option<f64>,
    /// Gamma prior shape on κ (VI).
    #[arg(long)]
    pub prior_a0: Option<f64>,
    /// Gamma prior rate on κ (VI).
    #[arg(long)]
    pub prior_b0: Option<f64>,
    /// Prior pseudo-count on the normalizing constant (SIR).
    #[arg(long)]
    pub prior_nu0: Option<f64>,
}

#[derive(Debug, Args)]
pub struct SirArgs {
    /// Variance of the Gamma proposal on κ.
    #[arg(long, default_value_t = 1.0)]
    pub proposal_var: f64,
    /// Mean of the Gamma proposal on κ; defaults to the MLE.
    #[arg(long)]
    pub proposal_mean: Option<f64>,
    #[arg(long, default_value_t = 10_000)]
    pub n_candidates: usize,
    #[arg(long, default_value_t = 1_000)]
    pub n_resample: usize,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[arg(long, default_value_t = DEFAULT_SEED)]
    pub seed: u64,
    /// Record wall-clock runtime in the report.
    #[arg(long)]
    pub timings: bool,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long, value_enum)]
    pub method: Method,
    #[command(flatten)]
    pub prior: PriorArgs,
    /// Convergence tolerance (Newton step for MLE, relative change of (a, b) for VI).
    #[arg(long)]
    pub tol: Option<f64>,
    #[arg(long)]
    pub max_iter: Option<usize>,
    #[command(flatten)]
    pub sir: SirArgs,
    #[command(flatten)]
    pub run: RunArgs,
}

#[derive(Debug, Args)]
pub struct MixtureFitArgs {
    #[arg(long, default_value_t = 5)]
    pub restarts: usize,
    #[arg(long, value_enum, default_value_t = InitArg::Seeded)]
    pub init: InitArg,
    #[arg(long, default_value_t = 1e-8)]
    pub tol: f64,
    #[arg(long, default_value_t = 1000)]
    pub max_iter: usize,
}

#[derive(Debug, Args)]
pub struct MixtureArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long)]
    pub clusters: usize,
    #[command(flatten)]
    pub fit: MixtureFitArgs,
    #[command(flatten)]
    pub run: RunArgs,
}

#[derive(Debug, Args)]
pub struct SelectArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long, default_value_t = 1)]
    pub min_g: usize,
    #[arg(long)]
    pub max_g: usize,
    /// Posterior draws per DIC estimate.
    #[arg(long, default_value_t = anglerank::DIC_DRAWS)]
    pub draws: usize,
    #[command(flatten)]
    pub fit: MixtureFitArgs,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct IncompleteArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long, value_enum)]
    pub kind: DataKind,
    #[arg(long, value_enum)]
    pub backend: BackendKind,
    #[arg(long, default_value_t = 400)]
    pub sweeps: usize,
    #[arg(long, default_value_t = 200)]
    pub burn_in: usize,
    /// Metropolis proposals per ranking per sweep.
    #[arg(long, default_value_t = 10)]
    pub inner_steps: usize,
    /// How each sweep's refit feeds the next imputation; defaults to mean for VI, draw for SIR.
    #[arg(long, value_enum)]
    pub plug_in: Option<PlugInArg>,
    #[command(flatten)]
    pub prior: PriorArgs,
    #[arg(long)]
    pub tol: Option<f64>,
    #[arg(long)]
    pub max_iter: Option<usize>,
    #[command(flatten)]
    pub sir: SirArgs,
    #[command(flatten)]
    pub run: RunArgs,
}

#[derive(Debug, Args)]
pub struct SampleArgs {
    #[arg(long)]
    pub t: usize,
    #[arg(long)]
    pub kappa: f64,
    /// Modal direction, one value per line; defaults to the identity ranking.
    #[arg(long)]
    pub theta_file: Option<PathBuf>,
    #[arg(long)]
    pub n: usize,
    /// Metropolis steps discarded first; defaults to 1000·t.
    #[arg(long)]
    pub burn_in: Option<usize>,
    /// Steps between kept draws; defaults to t.
    #[arg(long)]
    pub thin: Option<usize>,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct ModelDataArgs {
    /// JSON report written by a fit command.
    #[arg(long)]
    pub model_file: PathBuf,
    #[command(flatten)]
    pub data: DataArgs,
}

#[derive(Debug, Subcommand)]
pub enum Evaluate {
    /// KL divergence KL(a ‖ b) between two single-population models.
    Kld(KldArgs),
}

#[derive(Debug, Args)]
pub struct KldArgs {
    #[arg(long)]
    pub model_a: PathBuf,
    #[arg(long)]
    pub model_b: PathBuf,
    #[arg(long, value_enum, default_value_t = KldMethodArg::Exact)]
    pub method: KldMethodArg,
    /// Draws for the Monte Carlo estimate.
    #[arg(long, default_value_t = 100_000)]
    pub mc_n: usize,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct NcErrorArgs {
    #[arg(long, default_value_t = 8)]
    pub max_t: usize,
    #[arg(long, value_delimiter = ',', default_values_t = [0.01, 0.1, 0.5, 0.8, 1.0, 2.0])]
    pub kappas: Vec<f64>,
}
