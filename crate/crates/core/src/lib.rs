//! Confidence intervals for Pearson and Spearman correlation on bivariate
//! count data, and a Monte Carlo harness that measures their coverage.
//!
//! The interval constructions live in [`intervals`] (bootstrap Normal,
//! Basic, Percentile, BCa, Studentized, plus Fisher's z) and [`abc`]. They
//! share the resampling machinery in [`resampling`]. Data come from the two
//! families in [`distributions`]; [`harness`] runs the coverage, bias and
//! MSE studies.

pub mod abc;
pub mod distributions;
pub mod error;
pub mod estimators;
pub mod harness;
pub mod intervals;
pub mod normal;
pub mod resampling;
pub mod sample;
pub mod seeding;

pub use distributions::{
    BivariateNegBinParams, BivariatePoissonParams, DistributionSpec, Family,
};
pub use error::{Error, Result};
pub use estimators::{EstimatorKind, SpearmanSETable, Statistic};
pub use intervals::{ConfidenceInterval, Method, StudentizedSEPolicy};
pub use resampling::{BootstrapDistribution, InfluenceKind, InfluenceValues};
pub use sample::PairedSample;

/// Tail probability giving 95% nominal two-sided coverage.
pub const DEFAULT_ALPHA: f64 = 0.025;
/// Bootstrap resamples per dataset.
pub const DEFAULT_B: usize = 1000;
/// Simulated datasets per study cell.
pub const DEFAULT_SIMS: usize = 2000;
pub const DEFAULT_SAMPLE_SIZES: [usize; 4] = [10, 20, 50, 100];
pub const DEFAULT_RHOS: [f64; 4] = [0.25, 0.5, 0.75, 0.9];
/// Datasets per simulated Spearman standard error.
pub const DEFAULT_SE_REPS: usize = 1000;
