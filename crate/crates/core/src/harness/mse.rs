use std::time::Instant;

use rayon::prelude::*;

use super::output::sort_mse_rows;
use super::{cell_key, describe, draw_dataset, thread_pool, MseConfig, MseResultRow, RedrawTotals, StudySummary};
use crate::error::Result;
use crate::estimators::{mean, sample_variance};

/// Per (family, ρ, n, estimator): variance (divisor `reps − 1`) plus squared
/// bias of the estimates from `reps` fresh datasets of size `n`.
pub fn run_mse_study(config: &MseConfig) -> Result<StudySummary<MseResultRow>> {
    config.validate()?;
    let start = Instant::now();
    let pool = thread_pool(config.workers)?;

    let mut cells = Vec::new();
    for family in &config.families {
        for &rho in &config.rhos {
            let spec = family.solve(rho)?;
            for &n in &config.sample_sizes {
                cells.push((spec, rho, n, cell_key(family, rho, n)));
            }
        }
    }

    let results = pool.install(|| {
        cells
            .par_iter()
            .map(|&(spec, rho, n, cell)| {
                let rho_true = spec.correlation()?;
                let per_rep = (0..config.reps)
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
                    .map_err(|e| e.in_combination(describe(&spec, rho, n)))?;

                let discarded: usize = per_rep.iter().map(|(_, d)| d).sum();
                let rows: Vec<MseResultRow> = config
                    .estimators
                    .iter()
                    .enumerate()
                    .map(|(k, &estimator)| {
                        let values: Vec<f64> = per_rep.iter().map(|(v, _)| v[k]).collect();
                        let variance = sample_variance(&values);
                        let bias = mean(&values) - rho_true;
                        MseResultRow {
                            distribution: spec.label().to_string(),
                            rho_true,
                            n,
                            estimator,
                            mse: variance + bias * bias,
                            reps: config.reps,
                            seed: config.seed,
                            variance,
                            bias,
                        }
                    })
                    .collect();
                Ok((rows, discarded))
            })
            .collect::<Result<Vec<_>>>()
    })?;

    let mut redraws = RedrawTotals::default();
    let mut rows = Vec::new();
    for (r, d) in results {
        rows.extend(r);
        redraws.datasets += d;
    }
    let rows_written = rows.len();
    sort_mse_rows(&mut rows);
    Ok(StudySummary { rows, rows_written, wall_time: start.elapsed(), redraws })
}
