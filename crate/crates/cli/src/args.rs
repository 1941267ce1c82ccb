use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use corrboot::{EstimatorKind, Method};

#[derive(Debug, Parser)]
#[command(name = "corrboot", version, about = "Correlation confidence intervals for bivariate count data")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Confidence intervals for a two-column data file.
    Ci(CiArgs),
    /// Coverage and length study of the interval methods.
    Coverage(CoverageArgs),
    /// Large-sample bias of the estimators.
    Bias(BiasArgs),
    /// MSE of the estimators over a correlation grid.
    Mse(MseArgs),
    /// Simulated Spearman standard errors, cached to CSV.
    SeTable(SeTableArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Dist {
    Poisson,
    Negbin,
    Both,
}

#[derive(Debug, Args)]
pub struct FamilyArgs {
    /// Distribution family.
    #[arg(long, value_enum, default_value = "both")]
    pub dist: Dist,
    /// Fixed lambda1 of the Poisson family.
    #[arg(long, default_value_t = 0.5)]
    pub lambda1: f64,
    /// Fixed lambda2 of the Poisson family.
    #[arg(long, default_value_t = 1.0)]
    pub lambda2: f64,
    /// Shape r of the negative binomial family.
    #[arg(long, default_value_t = 5)]
    pub r: u32,
    /// Ratio p2/p1 of the negative binomial family.
    #[arg(long, default_value_t = 2.0)]
    pub ratio: f64,
}

#[derive(Debug, Args)]
pub struct RhoArgs {
    /// Target correlations, comma separated.
    #[arg(long, value_delimiter = ',', conflicts_with = "rho_grid")]
    pub rho: Vec<f64>,
    /// Inclusive grid of targets as start:stop:step.
    #[arg(long, value_name = "START:STOP:STEP")]
    pub rho_grid: Option<String>,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    /// Master seed. A random seed is drawn and reported when omitted.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker threads. Defaults to the available parallelism.
    #[arg(long, env = "CORRBOOT_WORKERS")]
    pub workers: Option<usize>,
    /// Output CSV path. Writes to stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CiArgs {
    /// Two integer columns separated by commas or whitespace; '#' starts a comment.
    pub input: PathBuf,
    #[arg(long, default_value = "pearson")]
    pub estimator: EstimatorKind,
    /// Methods, comma separated. All eight when omitted.
    #[arg(long, value_delimiter = ',')]
    pub methods: Vec<Method>,
    #[arg(long, default_value_t = corrboot::DEFAULT_ALPHA)]
    pub alpha: f64,
    #[arg(long = "B", default_value_t = corrboot::DEFAULT_B)]
    pub b: usize,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Standard error used by the Studentized method for Spearman.
    #[arg(long)]
    pub spearman_se: Option<f64>,
}

#[derive(Debug, Args)]
pub struct CoverageArgs {
    #[command(flatten)]
    pub family: FamilyArgs,
    #[command(flatten)]
    pub rho: RhoArgs,
    /// Sample sizes, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub n: Vec<usize>,
    /// Estimators, comma separated. Pearson only when omitted.
    #[arg(long, value_delimiter = ',')]
    pub estimators: Vec<EstimatorKind>,
    /// Methods, comma separated (normal, basic, percentile, bca-neg, bca-pos,
    /// abc, studentized, fisher). All eight when omitted.
    #[arg(long, value_delimiter = ',')]
    pub methods: Vec<Method>,
    /// Simulated datasets per combination.
    #[arg(long, default_value_t = corrboot::DEFAULT_SIMS)]
    pub sims: usize,
    /// Bootstrap replicates per dataset.
    #[arg(long = "B", default_value_t = corrboot::DEFAULT_B)]
    pub b: usize,
    /// Tail probability on each side; nominal coverage is 1 - 2 alpha.
    #[arg(long, default_value_t = corrboot::DEFAULT_ALPHA)]
    pub alpha: f64,
    /// Datasets per simulated Spearman SE.
    #[arg(long, default_value_t = corrboot::DEFAULT_SE_REPS)]
    pub se_reps: usize,
    /// CSV cache of simulated Spearman SEs, read and updated.
    #[arg(long)]
    pub se_table: Option<PathBuf>,
    /// Append each finished combination to this JSON-lines file.
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    /// Skip combinations already present in the checkpoint file.
    #[arg(long, requires = "checkpoint")]
    pub resume: bool,
    /// Run negative binomial targets at or above 0.9.
    #[arg(long)]
    pub allow_negbin_high_rho: bool,
    /// Append a mean_clipped_length column.
    #[arg(long)]
    pub clipped_length: bool,
    #[command(flatten)]
    pub run: RunArgs,
}

#[derive(Debug, Args)]
pub struct BiasArgs {
    #[command(flatten)]
    pub family: FamilyArgs,
    #[command(flatten)]
    pub rho: RhoArgs,
    #[arg(long, value_delimiter = ',')]
    pub estimators: Vec<EstimatorKind>,
    #[arg(long, default_value_t = 1_000_000)]
    pub pairs_per_rep: usize,
    #[arg(long, default_value_t = 1000)]
    pub reps: usize,
    #[arg(long)]
    pub allow_negbin_high_rho: bool,
    #[command(flatten)]
    pub run: RunArgs,
}

#[derive(Debug, Args)]
pub struct MseArgs {
    #[command(flatten)]
    pub family: FamilyArgs,
    #[command(flatten)]
    pub rho: RhoArgs,
    #[arg(long, value_delimiter = ',')]
    pub n: Vec<usize>,
    #[arg(long, value_delimiter = ',')]
    pub estimators: Vec<EstimatorKind>,
    #[arg(long, default_value_t = 1000)]
    pub reps: usize,
    #[command(flatten)]
    pub run: RunArgs,
}

#[derive(Debug, Args)]
pub struct SeTableArgs {
    #[command(flatten)]
    pub family: FamilyArgs,
    #[command(flatten)]
    pub rho: RhoArgs,
    #[arg(long, value_delimiter = ',')]
    pub n: Vec<usize>,
    #[arg(long, default_value_t = corrboot::DEFAULT_SE_REPS)]
    pub reps: usize,
    #[arg(long)]
    pub allow_negbin_high_rho: bool,
    #[command(flatten)]
    pub run: RunArgs,
}
