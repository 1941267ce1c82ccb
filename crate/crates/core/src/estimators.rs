//! Pearson and Spearman correlation, their standard errors, and the Fisher
//! z-transform.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::distributions::DistributionSpec;
use crate::error::{Coordinate, Error, Result};
use crate::sample::PairedSample;
use crate::seeding::{self, TAG_SE_TABLE};

/// A statistic of a paired count sample. `None` means the statistic is
/// undefined on that sample (for example a correlation with a constant column).
pub trait Statistic: Sync {
    fn evaluate(&self, xs: &[u32], ys: &[u32]) -> Option<f64>;
}

impl<F> Statistic for F
where
    F: Fn(&[u32], &[u32]) -> Option<f64> + Sync,
{
    fn evaluate(&self, xs: &[u32], ys: &[u32]) -> Option<f64> {
        self(xs, ys)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EstimatorKind {
    Pearson,
    Spearman,
}

impl EstimatorKind {
    pub const ALL: [EstimatorKind; 2] = [EstimatorKind::Pearson, EstimatorKind::Spearman];

    pub fn label(&self) -> &'static str {
        match self {
            EstimatorKind::Pearson => "pearson",
            EstimatorKind::Spearman => "spearman",
        }
    }

    pub fn estimate(&self, sample: &PairedSample) -> Result<f64> {
        match self {
            EstimatorKind::Pearson => pearson_r(sample),
            EstimatorKind::Spearman => spearman_rho(sample),
        }
    }
}

impl Statistic for EstimatorKind {
    fn evaluate(&self, xs: &[u32], ys: &[u32]) -> Option<f64> {
        match self {
            EstimatorKind::Pearson => correlation(xs, ys).ok(),
            EstimatorKind::Spearman => correlation(&midranks(xs), &midranks(ys)).ok(),
        }
    }
}

impl fmt::Display for EstimatorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for EstimatorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "pearson" => Ok(EstimatorKind::Pearson),
            "spearman" => Ok(EstimatorKind::Spearman),
            other => Err(Error::InvalidParameter(format!("unknown estimator '{other}'"))),
        }
    }
}

/// Product-moment correlation of two equal-length numeric slices.
pub fn correlation<T: Copy + Into<f64>>(xs: &[T], ys: &[T]) -> Result<f64> {
    debug_assert_eq!(xs.len(), ys.len());
    let n = xs.len() as f64;
    let mx = xs.iter().map(|&v| v.into()).sum::<f64>() / n;
    let my = ys.iter().map(|&v| v.into()).sum::<f64>() / n;
    let (mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0);
    for (&x, &y) in xs.iter().zip(ys) {
        let dx = x.into() - mx;
        let dy = y.into() - my;
        sxx += dx * dx;
        syy += dy * dy;
        sxy += dx * dy;
    }
    if sxx <= 0.0 {
        return Err(Error::ZeroVariance(Coordinate::X));
    }
    if syy <= 0.0 {
        return Err(Error::ZeroVariance(Coordinate::Y));
    }
    Ok((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

/// Correlation under observation weights. Weights are normalized by their sum
/// and may be negative; `None` when either weighted variance is not positive.
pub fn weighted_correlation(xs: &[f64], ys: &[f64], weights: &[f64]) -> Option<f64> {
    let total: f64 = weights.iter().sum();
    if total.abs() < f64::EPSILON {
        return None;
    }
    let mx = xs.iter().zip(weights).map(|(x, w)| w * x).sum::<f64>() / total;
    let my = ys.iter().zip(weights).map(|(y, w)| w * y).sum::<f64>() / total;
    let (mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0);
    for ((&x, &y), &w) in xs.iter().zip(ys).zip(weights) {
        let dx = x - mx;
        let dy = y - my;
        sxx += w * dx * dx;
        syy += w * dy * dy;
        sxy += w * dx * dy;
    }
    if sxx <= 0.0 || syy <= 0.0 {
        return None;
    }
    Some(sxy / (sxx * syy).sqrt())
}

/// 1-based ranks with ties replaced by the average of the positions they occupy.
pub fn midranks(values: &[u32]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_unstable_by_key(|&i| values[i]);
    let mut ranks = vec![0.0; values.len()];
    let mut start = 0;
    while start < order.len() {
        let v = values[order[start]];
        let mut end = start + 1;
        while end < order.len() && values[order[end]] == v {
            end += 1;
        }
        // positions start+1 ..= end share the mean rank
        let rank = (start + 1 + end) as f64 / 2.0;
        for &i in &order[start..end] {
            ranks[i] = rank;
        }
        start = end;
    }
    ranks
}

pub fn pearson_r(sample: &PairedSample) -> Result<f64> {
    correlation(sample.xs(), sample.ys())
}

/// Spearman's rho with mid-ranks for ties, i.e. Pearson on the mid-rank transforms.
pub fn spearman_rho(sample: &PairedSample) -> Result<f64> {
    correlation(&midranks(sample.xs()), &midranks(sample.ys()))
}

/// Normal-theory standard error `(1 − r²)/sqrt(n − 3)`.
pub fn pearson_se(r: f64, n: usize) -> Result<f64> {
    if n < 4 {
        return Err(Error::Domain(format!("pearson_se needs n >= 4, got {n}")));
    }
    if !(r.abs() < 1.0) {
        return Err(Error::Domain(format!("pearson_se needs |r| < 1, got {r}")));
    }
    Ok((1.0 - r * r) / ((n - 3) as f64).sqrt())
}

pub fn fisher_z(r: f64) -> Result<f64> {
    if !(r.abs() < 1.0) {
        return Err(Error::Domain(format!("fisher_z needs |r| < 1, got {r}")));
    }
    Ok(r.atanh())
}

pub fn fisher_z_inv(phi: f64) -> f64 {
    phi.tanh()
}

/// Draws allowed per simulated dataset before an SE build gives up.
const SE_REDRAWS_PER_REP: usize = 100;

/// Standard deviation (divisor `reps − 1`) of Spearman's rho over `reps`
/// independent datasets of size `n` drawn from `spec`. Datasets on which rho
/// is undefined are redrawn, up to 100 draws per dataset.
pub fn build_spearman_se(spec: &DistributionSpec, n: usize, reps: usize, seed: u64) -> Result<f64> {
    if reps < 2 {
        return Err(Error::InvalidParameter(format!("SE table needs reps >= 2, got {reps}")));
    }
    let estimates = (0..reps)
        .into_par_iter()
        .map(|rep| {
            let mut rng = seeding::stream(seed, &[TAG_SE_TABLE, rep as u64]);
            for _ in 0..SE_REDRAWS_PER_REP {
                let sample = spec.sample(n, &mut rng)?;
                if let Ok(rho) = spearman_rho(&sample) {
                    return Ok(rho);
                }
            }
            Err(Error::RedrawBudgetExhausted { budget: SE_REDRAWS_PER_REP * reps })
        })
        .collect::<Result<Vec<f64>>>()?;
    let se = sample_sd(&estimates);
    if !(se > 0.0) {
        return Err(Error::DegenerateParams(format!(
            "simulated Spearman SE is {se} for {} at n = {n}",
            spec.params_string()
        )));
    }
    Ok(se)
}

pub(crate) fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// Sample variance with divisor `len − 1`.
pub(crate) fn sample_variance(values: &[f64]) -> f64 {
    let m = mean(values);
    values.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (values.len() - 1) as f64
}

pub(crate) fn sample_sd(values: &[f64]) -> f64 {
    sample_variance(values).sqrt()
}

/// One cached simulated Spearman SE.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeEntry {
    pub distribution: String,
    pub params: String,
    pub n: usize,
    pub reps: usize,
    pub seed: u64,
    pub se: f64,
}

/// Simulated Spearman standard errors keyed by distribution, `n`, reps and seed.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SpearmanSETable {
    entries: Vec<SeEntry>,
}

impl SpearmanSETable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn entries(&self) -> &[SeEntry] {
        &self.entries
    }

    pub fn get(&self, spec: &DistributionSpec, n: usize, reps: usize, seed: u64) -> Option<f64> {
        let params = spec.params_string();
        self.entries
            .iter()
            .find(|e| {
                e.distribution == spec.label()
                    && e.params == params
                    && e.n == n
                    && e.reps == reps
                    && e.seed == seed
            })
            .map(|e| e.se)
    }

    pub fn insert(&mut self, entry: SeEntry) -> Result<()> {
        if !(entry.se > 0.0) {
            return Err(Error::InvalidParameter(format!("SE must be positive, got {}", entry.se)));
        }
        self.entries.retain(|e| {
            !(e.distribution == entry.distribution
                && e.params == entry.params
                && e.n == entry.n
                && e.reps == entry.reps
                && e.seed == entry.seed)
        });
        self.entries.push(entry);
        Ok(())
    }

    /// Returns the cached SE or builds and caches it.
    pub fn get_or_build(
        &mut self,
        spec: &DistributionSpec,
        n: usize,
        reps: usize,
        seed: u64,
    ) -> Result<f64> {
        if let Some(se) = self.get(spec, n, reps, seed) {
            return Ok(se);
        }
        let stream_seed = seeding::derive_seed(
            seed,
            &[seeding::label_key(spec.label()), seeding::label_key(&spec.params_string()), n as u64],
        );
        let se = build_spearman_se(spec, n, reps, stream_seed)?;
        self.insert(SeEntry {
            distribution: spec.label().to_string(),
            params: spec.params_string(),
            n,
            reps,
            seed,
            se,
        })?;
        Ok(se)
    }

    pub fn read_csv(path: &Path) -> Result<Self> {
        let mut reader = csv::Reader::from_path(path)?;
        let mut table = Self::new();
        for entry in reader.deserialize() {
            table.insert(entry?)?;
        }
        Ok(table)
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        self.write_csv_to(std::fs::File::create(path)?)
    }

    pub fn write_csv_to<W: std::io::Write>(&self, out: W) -> Result<()> {
        let mut writer = csv::Writer::from_writer(out);
        for e in &self.entries {
            writer.serialize(e)?;
        }
        writer.flush()?;
        Ok(())
    }
}
