//! Nonparametric bootstrap, jackknife influence values, and the BCa constants.

use rand::Rng;

use crate::error::{Error, Result};
use crate::estimators::Statistic;
use crate::normal;
use crate::sample::PairedSample;
use crate::seeding::{self, TAG_BOOTSTRAP};

/// Draws allowed per requested replicate, summed over the whole distribution.
pub const REDRAW_BUDGET_FACTOR: usize = 100;

/// Replicate values `θ*_1..θ*_B` together with the original estimate `θ̂`.
#[derive(Debug, Clone, PartialEq)]
pub struct BootstrapDistribution {
    theta_hat: f64,
    replicates: Vec<f64>,
    sorted: Vec<f64>,
    redraw_count: usize,
    seed: u64,
}

impl BootstrapDistribution {
    /// Wraps an existing replicate set. Panics if `replicates` is empty or
    /// contains a NaN.
    pub fn from_replicates(theta_hat: f64, replicates: Vec<f64>) -> Self {
        Self::build(theta_hat, replicates, 0, 0)
    }

    fn build(theta_hat: f64, replicates: Vec<f64>, redraw_count: usize, seed: u64) -> Self {
        assert!(!replicates.is_empty(), "a bootstrap distribution needs B >= 1");
        let mut sorted = replicates.clone();
        sorted.sort_by(|a, b| a.partial_cmp(b).expect("replicates must not be NaN"));
        Self { theta_hat, replicates, sorted, redraw_count, seed }
    }

    pub fn theta_hat(&self) -> f64 {
        self.theta_hat
    }

    /// Replicates in draw order.
    pub fn replicates(&self) -> &[f64] {
        &self.replicates
    }

    pub fn sorted(&self) -> &[f64] {
        &self.sorted
    }

    pub fn b(&self) -> usize {
        self.replicates.len()
    }

    /// Degenerate resamples that were discarded and redrawn.
    pub fn redraw_count(&self) -> usize {
        self.redraw_count
    }

    /// Seed the replicate streams were derived from.
    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// `Ĝ_B(t) = #{θ*_b ≤ t} / B`.
    pub fn ecdf(&self, t: f64) -> f64 {
        self.sorted.partition_point(|&v| v <= t) as f64 / self.b() as f64
    }

    /// Generalized inverse of the empirical CDF: the `k`-th order statistic
    /// with `k = ceil(q·B)` clamped to `[1, B]`.
    pub fn quantile(&self, q: f64) -> f64 {
        let b = self.b();
        let raw = q * b as f64;
        let nearest = raw.round();
        // q·B that should be an integer can land a few ulps above it
        let k = if (raw - nearest).abs() < 1e-9 { nearest } else { raw.ceil() };
        let k = if k.is_nan() { 1 } else { (k.max(1.0) as usize).min(b) };
        self.sorted[k - 1]
    }
}

/// Resamples pairs with replacement `b` times and evaluates `stat` on each
/// resample. Replicate `i` draws from a stream keyed by `(seed, i)`; a
/// resample on which `stat` is undefined is discarded and redrawn from the
/// same stream.
pub fn bootstrap_replicates(
    sample: &PairedSample,
    stat: &dyn Statistic,
    b: usize,
    seed: u64,
) -> Result<BootstrapDistribution> {
    if b == 0 {
        return Err(Error::InvalidParameter("B must be at least 1".into()));
    }
    let theta_hat = stat
        .evaluate(sample.xs(), sample.ys())
        .ok_or(Error::DegenerateOriginal)?;
    let n = sample.len();
    let budget = REDRAW_BUDGET_FACTOR * b;
    let mut draws = 0usize;
    let mut xs = vec![0u32; n];
    let mut ys = vec![0u32; n];
    let mut replicates = Vec::with_capacity(b);
    for i in 0..b {
        let mut rng = seeding::stream(seed, &[TAG_BOOTSTRAP, i as u64]);
        loop {
            if draws >= budget {
                return Err(Error::RedrawBudgetExhausted { budget });
            }
            draws += 1;
            resample_into(sample, &mut rng, &mut xs, &mut ys);
            if let Some(v) = stat.evaluate(&xs, &ys) {
                replicates.push(v);
                break;
            }
        }
    }
    Ok(BootstrapDistribution::build(theta_hat, replicates, draws - b, seed))
}

pub(crate) fn resample_into<R: Rng + ?Sized>(
    sample: &PairedSample,
    rng: &mut R,
    xs: &mut [u32],
    ys: &mut [u32],
) {
    let n = sample.len();
    for (x, y) in xs.iter_mut().zip(ys.iter_mut()) {
        let j = rng.random_range(0..n);
        *x = sample.xs()[j];
        *y = sample.ys()[j];
    }
}

/// Convenience wrapper for [`BootstrapDistribution::quantile`].
pub fn ecdf_quantile(dist: &BootstrapDistribution, q: f64) -> f64 {
    dist.quantile(q)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum InfluenceKind {
    NegativeJackknife,
    PositiveJackknife,
    InfinitesimalNumeric,
}

#[derive(Debug, Clone, PartialEq)]
pub struct InfluenceValues {
    pub values: Vec<f64>,
    pub kind: InfluenceKind,
}

/// `I_i = (n−1)·(θ̂ − θ̂_(−i))` from leave-one-out subsamples.
pub fn jackknife_influence_negative(
    sample: &PairedSample,
    stat: &dyn Statistic,
) -> Result<InfluenceValues> {
    let full = stat
        .evaluate(sample.xs(), sample.ys())
        .ok_or(Error::DegenerateOriginal)?;
    let n = sample.len();
    let mut xs = Vec::with_capacity(n - 1);
    let mut ys = Vec::with_capacity(n - 1);
    let mut values = Vec::with_capacity(n);
    for i in 0..n {
        xs.clear();
        ys.clear();
        for (j, (x, y)) in sample.pairs().enumerate() {
            if j != i {
                xs.push(x);
                ys.push(y);
            }
        }
        let without = stat
            .evaluate(&xs, &ys)
            .ok_or(Error::DegenerateSubsample { variant: "negative", index: i })?;
        values.push((n - 1) as f64 * (full - without));
    }
    Ok(InfluenceValues { values, kind: InfluenceKind::NegativeJackknife })
}

/// `I_i = (n+1)·(θ̂_(+i) − θ̂)` where `θ̂_(+i)` is computed with pair `i` duplicated.
pub fn jackknife_influence_positive(
    sample: &PairedSample,
    stat: &dyn Statistic,
) -> Result<InfluenceValues> {
    let full = stat
        .evaluate(sample.xs(), sample.ys())
        .ok_or(Error::DegenerateOriginal)?;
    let n = sample.len();
    let mut xs = sample.xs().to_vec();
    let mut ys = sample.ys().to_vec();
    xs.push(0);
    ys.push(0);
    let mut values = Vec::with_capacity(n);
    for i in 0..n {
        xs[n] = sample.xs()[i];
        ys[n] = sample.ys()[i];
        let with = stat
            .evaluate(&xs, &ys)
            .ok_or(Error::DegenerateSubsample { variant: "positive", index: i })?;
        values.push((n + 1) as f64 * (with - full));
    }
    Ok(InfluenceValues { values, kind: InfluenceKind::PositiveJackknife })
}

/// `â = Σ I³ / (6 (Σ I²)^{3/2})`.
pub fn acceleration(influence: &InfluenceValues) -> Result<f64> {
    acceleration_of(&influence.values)
}

pub(crate) fn acceleration_of(values: &[f64]) -> Result<f64> {
    let s2: f64 = values.iter().map(|v| v * v).sum();
    if !(s2 > 0.0) {
        return Err(Error::ZeroInfluence);
    }
    let s3: f64 = values.iter().map(|v| v * v * v).sum();
    Ok(s3 / (6.0 * s2.powf(1.5)))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BiasCorrection {
    pub z0: f64,
    /// The below-`θ̂` proportion was 0 or 1 and got clamped.
    pub clamped: bool,
}

/// `ẑ0 = Φ⁻¹(#{θ*_b < θ̂}/B)` with the proportion clamped into `[1/(2B), 1 − 1/(2B)]`.
pub fn bias_correction_z0(dist: &BootstrapDistribution) -> BiasCorrection {
    let b = dist.b() as f64;
    let below = dist.sorted().partition_point(|&v| v < dist.theta_hat()) as f64;
    let raw = below / b;
    let lo = 1.0 / (2.0 * b);
    let hi = 1.0 - lo;
    let p = raw.clamp(lo, hi);
    BiasCorrection { z0: normal::quantile(p), clamped: p != raw }
}
