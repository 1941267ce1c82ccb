use std::sync::Mutex;
use std::time::Instant;

use rayon::prelude::*;

use super::config::targets_for;
use super::output::sort_coverage_rows;
use super::{
    cell_key, describe, draw_dataset, thread_pool, Checkpoint, RedrawTotals, RowSink,
    StudyConfig, StudyResultRow, StudySummary,
};
use crate::distributions::{DistributionSpec, Family};
use crate::error::{Error, Result};
use crate::estimators::{EstimatorKind, SpearmanSETable};
use crate::intervals::{ci_for_method, Method};
use crate::resampling::bootstrap_replicates;
use crate::seeding;

/// Runs the coverage study with a fresh Spearman SE table and no checkpoint.
pub fn run_coverage_study(
    config: &StudyConfig,
    sink: &mut dyn RowSink,
) -> Result<StudySummary<StudyResultRow>> {
    run_coverage_study_with(config, &mut SpearmanSETable::new(), &Checkpoint::default(), sink)
}

/// Runs the coverage study. Combinations found in `completed` are not
/// recomputed; their rows are merged into the result. Spearman SEs missing
/// from `se_table` are built and added to it.
pub fn run_coverage_study_with(
    config: &StudyConfig,
    se_table: &mut SpearmanSETable,
    completed: &Checkpoint,
    sink: &mut dyn RowSink,
) -> Result<StudySummary<StudyResultRow>> {
    config.validate()?;
    let start = Instant::now();
    let pool = thread_pool(config.workers)?;

    let mut restored = Vec::new();
    let mut pending = Vec::new();
    for family in &config.families {
        for rho in targets_for(family, &config.rhos, config.allow_negbin_high_rho) {
            let spec = family.solve(rho)?;
            for &n in &config.sample_sizes {
                for &estimator in &config.estimators {
                    let key = combination_key(config, family, rho, n, estimator);
                    match completed.get(&key) {
                        Some(rows) => restored.extend_from_slice(rows),
                        None => pending.push(Combination { family: *family, spec, rho, n, estimator, key }),
                    }
                }
            }
        }
    }

    let needs_se = config.methods.contains(&Method::Studentized);
    let mut se_for = Vec::with_capacity(pending.len());
    for c in &pending {
        let se = if needs_se && c.estimator == EstimatorKind::Spearman {
            let se = pool
                .install(|| se_table.get_or_build(&c.spec, c.n, config.se_reps, config.seed))
                .map_err(|e| e.in_combination(format!("Spearman SE for {}", describe(&c.spec, c.rho, c.n))))?;
            Some(se)
        } else {
            None
        };
        se_for.push(se);
    }

    let sink = Mutex::new(sink);
    let results = pool.install(|| {
        pending
            .par_iter()
            .zip(se_for.par_iter())
            .map(|(c, &se)| {
                let (rows, redraws) = run_combination(config, c, se).map_err(|e| {
                    e.in_combination(format!("{}, {}", describe(&c.spec, c.rho, c.n), c.estimator))
                })?;
                sink.lock().expect("sink lock").accept(&c.key, &rows)?;
                Ok((rows, redraws))
            })
            .collect::<Result<Vec<_>>>()
    })?;

    let mut redraws = RedrawTotals::default();
    let mut rows = Vec::new();
    for (r, d) in results {
        rows.extend(r);
        redraws += d;
    }
    let rows_written = rows.len();
    rows.extend(restored);
    sort_coverage_rows(&mut rows);
    Ok(StudySummary { rows, rows_written, wall_time: start.elapsed(), redraws })
}

/// Builds (or finds cached) Spearman SEs for every (family, target, n) of
/// `config` at `config.se_reps` datasets each. Returns the number of entries
/// that had to be built.
pub fn build_se_table(config: &StudyConfig, table: &mut SpearmanSETable) -> Result<usize> {
    config.validate()?;
    let pool = thread_pool(config.workers)?;
    let mut built = 0;
    for family in &config.families {
        for rho in targets_for(family, &config.rhos, config.allow_negbin_high_rho) {
            let spec = family.solve(rho)?;
            for &n in &config.sample_sizes {
                if table.get(&spec, n, config.se_reps, config.seed).is_none() {
                    pool.install(|| table.get_or_build(&spec, n, config.se_reps, config.seed))
                        .map_err(|e| e.in_combination(format!("Spearman SE for {}", describe(&spec, rho, n))))?;
                    built += 1;
                }
            }
        }
    }
    Ok(built)
}

/// Checkpoint key of one (family, ρ, n, estimator) combination. It also
/// records every setting that changes the rows, so a checkpoint written under
/// different settings is never reused.
pub fn combination_key(
    config: &StudyConfig,
    family: &Family,
    rho: f64,
    n: usize,
    estimator: EstimatorKind,
) -> String {
    let methods: Vec<&str> = config.methods.iter().map(Method::label).collect();
    format!(
        "{}|rho={rho}|n={n}|{estimator}|sims={}|B={}|alpha={}|seed={}|se_reps={}|{}",
        serde_json::to_string(family).expect("family serializes"),
        config.n_sims,
        config.b,
        config.alpha,
        config.seed,
        config.se_reps,
        methods.join(","),
    )
}

struct Combination {
    family: Family,
    spec: DistributionSpec,
    rho: f64,
    n: usize,
    estimator: EstimatorKind,
    key: String,
}

/// What one method produced on one dataset.
#[derive(Clone, Copy)]
struct Outcome {
    covered: bool,
    length: f64,
    clipped_length: f64,
    exceeds_range: bool,
    clamped_r: bool,
}

struct SimResult {
    outcomes: Vec<Option<Outcome>>,
    redraws: RedrawTotals,
}

fn run_combination(
    config: &StudyConfig,
    c: &Combination,
    spearman_se: Option<f64>,
) -> Result<(Vec<StudyResultRow>, RedrawTotals)> {
    let rho_true = c.spec.correlation()?;
    let cell = cell_key(&c.family, c.rho, c.n);
    let sims = (0..config.n_sims)
        .into_par_iter()
        .map(|sim| simulate(config, c, cell, sim, rho_true, spearman_se))
        .collect::<Result<Vec<_>>>()?;

    let mut redraws = RedrawTotals::default();
    for s in &sims {
        redraws += s.redraws;
    }
    let rows = config
        .methods
        .iter()
        .enumerate()
        .map(|(m, &method)| {
            // summed in simulation order so totals do not depend on scheduling
            let done: Vec<Outcome> = sims.iter().filter_map(|s| s.outcomes[m]).collect();
            let count = done.len() as f64;
            let covered = done.iter().filter(|o| o.covered).count() as f64;
            let length: f64 = done.iter().map(|o| o.length).sum();
            let clipped: f64 = done.iter().map(|o| o.clipped_length).sum();
            let degenerate_count = if method == Method::Fisher {
                done.iter().filter(|o| o.clamped_r).count()
            } else {
                config.n_sims - done.len()
            };
            StudyResultRow {
                distribution: c.spec.label().to_string(),
                params: c.spec.params_string(),
                rho_true,
                n: c.n,
                estimator: c.estimator,
                method,
                coverage: covered / count,
                mean_length: length / count,
                degenerate_count,
                exceeds_range_count: done.iter().filter(|o| o.exceeds_range).count(),
                n_sims: config.n_sims,
                b: config.b,
                seed: config.seed,
                mean_clipped_length: Some(clipped / count),
            }
        })
        .collect();
    Ok((rows, redraws))
}

fn simulate(
    config: &StudyConfig,
    c: &Combination,
    cell: u64,
    sim: usize,
    rho_true: f64,
    spearman_se: Option<f64>,
) -> Result<SimResult> {
    let estimator = c.estimator;
    let (sample, discarded) = draw_dataset(&c.spec, c.n, config.seed, cell, sim, |s| {
        estimator.estimate(s).is_ok()
    })?;
    let mut redraws = RedrawTotals { datasets: discarded, ..Default::default() };
    let theta = estimator.estimate(&sample)?;

    let dist = if config.methods.iter().any(Method::uses_bootstrap) {
        let seed = seeding::derive_seed(
            config.seed,
            &[cell, seeding::label_key(estimator.label()), sim as u64],
        );
        let dist = bootstrap_replicates(&sample, &estimator, config.b, seed)?;
        redraws.bootstrap = dist.redraw_count();
        Some(dist)
    } else {
        None
    };

    let mut outcomes = Vec::with_capacity(config.methods.len());
    for &method in &config.methods {
        let ci = ci_for_method(&sample, estimator, theta, method, dist.as_ref(), spearman_se, config.alpha);
        let ci = match ci {
            Ok(ci) => Some(ci),
            Err(e) if is_degenerate(&e) => None,
            Err(e) => return Err(e.in_combination(format!("{method}, simulation {sim}"))),
        };
        outcomes.push(ci.map(|ci| {
            redraws.studentized += ci.redraws;
            Outcome {
                covered: ci.contains(rho_true),
                length: ci.length(),
                clipped_length: ci.clipped_length(),
                exceeds_range: ci.exceeds_range,
                clamped_r: ci.clamped_r,
            }
        }));
    }
    Ok(SimResult { outcomes, redraws })
}

/// Failures that mean "this method has no interval for this dataset" rather
/// than a broken run.
fn is_degenerate(e: &Error) -> bool {
    matches!(
        e,
        Error::Domain(_)
            | Error::DegenerateSubsample { .. }
            | Error::ZeroInfluence
            | Error::ZeroSpread
            | Error::SingularDenominator { .. }
            | Error::DegenerateWeights
    )
}
