use std::time::Instant;

use rayon::prelude::*;

use super::config::targets_for;
use super::output::sort_bias_rows;
use super::{cell_key, describe, draw_dataset, thread_pool, BiasConfig, BiasResultRow, RedrawTotals, StudySummary};
use crate::error::Result;
use crate::estimators::{mean, sample_variance};

/// Mean and variance of each estimator over `reps` datasets of
/// `pairs_per_rep` pairs, per (family, ρ).
pub fn run_bias_study(config: &BiasConfig) -> Result<StudySummary<BiasResultRow>> {
    config.validate()?;
    let start = Instant::now();
    let pool = thread_pool(config.workers)?;
    let n = config.pairs_per_rep;
    let mut rows = Vec::new();
    let mut redraws = RedrawTotals::default();

    for family in &config.families {
        for rho in targets_for(family, &config.rhos, config.allow_negbin_high_rho) {
            let spec = family.solve(rho)?;
            let rho_true = spec.correlation()?;
            let cell = cell_key(family, rho, n);
            let per_rep = pool
                .install(|| {
                    (0..config.reps)
                        .into_par_iter()
                        .map(|rep| {
                            let estimators = &config.estimators;
                            let (sample, discarded) = draw_dataset(&spec, n, config.seed, cell, rep, |s| {
                                estimators.iter().all(|e| e.estimate(s).is_ok())
                            })?;
                            let values = estimators
                                .iter()
                                .map(|e| e.estimate(&sample))
                                .collect::<Result<Vec<f64>>>()?;
                            Ok((values, discarded))
                        })
                        .collect::<Result<Vec<_>>>()
                })
                .map_err(|e| e.in_combination(describe(&spec, rho, n)))?;

            redraws.datasets += per_rep.iter().map(|(_, d)| d).sum::<usize>();
            for (k, &estimator) in config.estimators.iter().enumerate() {
                let values: Vec<f64> = per_rep.iter().map(|(v, _)| v[k]).collect();
                let mean_estimate = mean(&values);
                rows.push(BiasResultRow {
                    distribution: spec.label().to_string(),
                    rho_true,
                    estimator,
                    mean_estimate,
                    variance: sample_variance(&values),
                    bias: mean_estimate - rho_true,
                    pairs_per_rep: n,
                    reps: config.reps,
                    seed: config.seed,
                });
            }
        }
    }
    let rows_written = rows.len();
    sort_bias_rows(&mut rows);
    Ok(StudySummary { rows, rows_written, wall_time: start.elapsed(), redraws })
}
