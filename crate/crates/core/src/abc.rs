//! Approximate bootstrap confidence (ABC) intervals.
//!
//! The statistic is re-expressed as a function of a weight vector `P` on the
//! observations, with `P0 = (1/n, …, 1/n)` reproducing `θ̂`. First and second
//! directional derivatives at `P0` are taken by central differences with step
//! `ε = 1/(100·n)`, and from them the standard error, acceleration, bias and
//! curvature that locate the endpoints analytically. No resampling happens.

use crate::error::{Error, Result};
use crate::estimators::{midranks, weighted_correlation, EstimatorKind};
use crate::intervals::{check_alpha, ConfidenceInterval, Method};
use crate::normal;
use crate::resampling::{acceleration_of, InfluenceKind, InfluenceValues};
use crate::sample::PairedSample;

/// Quantities computed on the way to the ABC endpoints.
#[derive(Debug, Clone, PartialEq)]
pub struct AbcDetails {
    pub interval: ConfidenceInterval,
    pub theta_hat: f64,
    /// Empirical influence components `t.` (first derivatives).
    pub influence: InfluenceValues,
    pub sigma: f64,
    pub acceleration: f64,
    pub z0: f64,
    pub curvature: f64,
    pub bias: f64,
}

/// ABC interval for a statistic given in weighted form. `stat` receives a
/// weight vector of length `n` summing to one and returns `None` where the
/// statistic is undefined.
pub fn abc_interval(
    stat: &dyn Fn(&[f64]) -> Option<f64>,
    n: usize,
    alpha: f64,
) -> Result<AbcDetails> {
    check_alpha(alpha)?;
    if n < 2 {
        return Err(Error::InvalidParameter(format!("ABC needs n >= 2, got {n}")));
    }
    let eval = |w: &[f64]| stat(w).filter(|v| v.is_finite()).ok_or(Error::DegenerateWeights);
    let nf = n as f64;
    let eps = 1.0 / (100.0 * nf);
    let p0 = vec![1.0 / nf; n];
    let t0 = eval(&p0)?;

    let mut first = Vec::with_capacity(n);
    let mut second = Vec::with_capacity(n);
    let mut w = p0.clone();
    for i in 0..n {
        // direction e_i − P0
        let shift = |w: &mut [f64], sign: f64| {
            for (j, wj) in w.iter_mut().enumerate() {
                let d = if j == i { 1.0 - 1.0 / nf } else { -1.0 / nf };
                *wj = 1.0 / nf + sign * eps * d;
            }
        };
        shift(&mut w, 1.0);
        let tp = eval(&w)?;
        shift(&mut w, -1.0);
        let tm = eval(&w)?;
        first.push((tp - tm) / (2.0 * eps));
        second.push((tp - 2.0 * t0 + tm) / (eps * eps));
    }

    let sum_sq: f64 = first.iter().map(|v| v * v).sum();
    let sigma = sum_sq.sqrt() / nf;
    if !(sigma > 0.0) {
        return Err(Error::ZeroInfluence);
    }
    let a = acceleration_of(&first)?;
    let delta: Vec<f64> = first.iter().map(|v| v / (nf * nf * sigma)).collect();
    let along = |lambda: f64| -> Vec<f64> {
        p0.iter().zip(&delta).map(|(p, d)| p + lambda * d).collect()
    };
    let cq = (eval(&along(eps))? - 2.0 * t0 + eval(&along(-eps))?) / (2.0 * sigma * eps * eps);
    let bias = second.iter().sum::<f64>() / (2.0 * nf * nf);
    let curvature = bias / sigma - cq;
    let z0 = normal::quantile(2.0 * normal::cdf(a) * normal::cdf(-curvature));

    let endpoint = |z: f64| -> Result<f64> {
        let w = z0 + z;
        let lambda = w / (1.0 - a * w).powi(2);
        eval(&along(lambda))
    };
    let lower = endpoint(normal::quantile(alpha))?;
    let upper = endpoint(normal::quantile(1.0 - alpha))?;
    let interval = ConfidenceInterval::new(lower, upper, Method::Abc, alpha);
    Ok(AbcDetails {
        interval,
        theta_hat: t0,
        influence: InfluenceValues { values: first, kind: InfluenceKind::InfinitesimalNumeric },
        sigma,
        acceleration: a,
        z0,
        curvature,
        bias,
    })
}

/// ABC interval for a correlation estimator. Pearson is reweighted directly;
/// Spearman reweights the Pearson correlation of the fixed mid-rank transforms.
pub fn ci_abc(sample: &PairedSample, estimator: EstimatorKind, alpha: f64) -> Result<ConfidenceInterval> {
    abc_details(sample, estimator, alpha).map(|d| d.interval)
}

pub fn abc_details(sample: &PairedSample, estimator: EstimatorKind, alpha: f64) -> Result<AbcDetails> {
    if sample.len() < 4 {
        return Err(Error::InvalidParameter(format!(
            "ABC needs n >= 4, got {}",
            sample.len()
        )));
    }
    let (xs, ys): (Vec<f64>, Vec<f64>) = match estimator {
        EstimatorKind::Pearson => (
            sample.xs().iter().map(|&v| v as f64).collect(),
            sample.ys().iter().map(|&v| v as f64).collect(),
        ),
        EstimatorKind::Spearman => (midranks(sample.xs()), midranks(sample.ys())),
    };
    let stat = |w: &[f64]| weighted_correlation(&xs, &ys, w);
    abc_interval(&stat, sample.len(), alpha)
}
