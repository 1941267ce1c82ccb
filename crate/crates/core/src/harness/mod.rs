//! Monte Carlo studies: interval coverage and length, large-sample bias, and
//! MSE over a correlation grid.
//!
//! Every dataset and resample is drawn from a stream keyed by the master
//! seed and the position of the item in the study grid, so results do not
//! depend on the number of workers or the order in which items finish.
//! Datasets are keyed without the estimator, so Pearson and Spearman see the
//! same simulated samples.

mod bias;
mod config;
mod coverage;
mod mse;
mod output;

use std::ops::AddAssign;
use std::time::Duration;

use serde::Serialize;

use crate::distributions::{DistributionSpec, Family};
use crate::error::{Error, Result};
use crate::sample::PairedSample;
use crate::seeding::{self, TAG_DATASET};

pub use bias::run_bias_study;
pub use config::{rho_grid, BiasConfig, MseConfig, StudyConfig, NEGBIN_RHO_LIMIT};
pub use coverage::{build_se_table, combination_key, run_coverage_study, run_coverage_study_with};
pub use mse::run_mse_study;
pub use output::{
    sort_coverage_rows, write_bias_csv, write_coverage_csv, write_mse_csv, BiasResultRow,
    Checkpoint, CheckpointSink, MseResultRow, NullSink, RowSink, StudyResultRow,
    COVERAGE_HEADER,
};

/// Draws per simulated dataset before a study gives up on a cell.
pub const DATASET_REDRAW_BUDGET: usize = 100;

/// Redraw tallies accumulated over a study.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct RedrawTotals {
    /// Simulated datasets discarded because the statistic was undefined.
    pub datasets: usize,
    /// Bootstrap resamples redrawn for the same reason.
    pub bootstrap: usize,
    /// Studentized replicates redrawn because their SE was zero.
    pub studentized: usize,
}

impl RedrawTotals {
    pub fn total(&self) -> usize {
        self.datasets + self.bootstrap + self.studentized
    }
}

impl AddAssign for RedrawTotals {
    fn add_assign(&mut self, rhs: Self) {
        self.datasets += rhs.datasets;
        self.bootstrap += rhs.bootstrap;
        self.studentized += rhs.studentized;
    }
}

/// Result of a study run. `rows` is sorted by combination key.
#[derive(Debug, Clone)]
pub struct StudySummary<R> {
    pub rows: Vec<R>,
    /// Rows computed in this run (excludes rows restored from a checkpoint).
    pub rows_written: usize,
    pub wall_time: Duration,
    pub redraws: RedrawTotals,
}

fn thread_pool(workers: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::InvalidParameter(format!("cannot start {workers} workers: {e}")))
}

/// Stable stream key for a (family, target ρ, n) cell.
fn cell_key(family: &Family, rho: f64, n: usize) -> u64 {
    let family = serde_json::to_string(family).expect("family serializes");
    seeding::derive_seed(seeding::label_key(&family), &[rho.to_bits(), n as u64])
}

fn describe(spec: &DistributionSpec, rho: f64, n: usize) -> String {
    format!("{} ({}) rho = {rho}, n = {n}", spec.label(), spec.params_string())
}

/// Draws dataset `index` of a cell, redrawing (within the same stream) until
/// `valid` accepts it. Returns the sample and the number of discarded draws.
fn draw_dataset(
    spec: &DistributionSpec,
    n: usize,
    seed: u64,
    cell: u64,
    index: usize,
    valid: impl Fn(&PairedSample) -> bool,
) -> Result<(PairedSample, usize)> {
    let mut rng = seeding::stream(seed, &[TAG_DATASET, cell, index as u64]);
    for discarded in 0..DATASET_REDRAW_BUDGET {
        let sample = spec.sample(n, &mut rng)?;
        if valid(&sample) {
            return Ok((sample, discarded));
        }
    }
    Err(Error::RedrawBudgetExhausted { budget: DATASET_REDRAW_BUDGET })
}
