use serde::{Deserialize, Serialize};

use crate::distributions::Family;
use crate::error::{Error, Result};
use crate::estimators::EstimatorKind;
use crate::intervals::{check_alpha, Method};

/// Negative binomial targets at or above this are skipped unless
/// `allow_negbin_high_rho` is set.
pub const NEGBIN_RHO_LIMIT: f64 = 0.9;

/// Parameterization of a coverage/length study.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyConfig {
    pub families: Vec<Family>,
    pub rhos: Vec<f64>,
    pub sample_sizes: Vec<usize>,
    pub estimators: Vec<EstimatorKind>,
    pub methods: Vec<Method>,
    pub n_sims: usize,
    #[serde(rename = "B")]
    pub b: usize,
    pub alpha: f64,
    pub seed: u64,
    pub workers: usize,
    /// Datasets per simulated Spearman SE (Studentized + Spearman only).
    pub se_reps: usize,
    pub allow_negbin_high_rho: bool,
}

impl Default for StudyConfig {
    fn default() -> Self {
        Self {
            families: vec![Family::STANDARD_POISSON, Family::STANDARD_NEGBIN],
            rhos: crate::DEFAULT_RHOS.to_vec(),
            sample_sizes: crate::DEFAULT_SAMPLE_SIZES.to_vec(),
            estimators: EstimatorKind::ALL.to_vec(),
            methods: Method::ALL.to_vec(),
            n_sims: crate::DEFAULT_SIMS,
            b: crate::DEFAULT_B,
            alpha: crate::DEFAULT_ALPHA,
            seed: 0,
            workers: 1,
            se_reps: crate::DEFAULT_SE_REPS,
            allow_negbin_high_rho: false,
        }
    }
}

impl StudyConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_sims < 1 {
            return Err(invalid("n_sims must be at least 1"));
        }
        if self.b < 1 {
            return Err(invalid("B must be at least 1"));
        }
        if self.methods.contains(&Method::Normal) && self.b < 2 {
            return Err(invalid("the Normal method needs B >= 2"));
        }
        if self.se_reps < 2 {
            return Err(invalid("se_reps must be at least 2"));
        }
        check_alpha(self.alpha)?;
        nonempty(&self.methods, "methods")?;
        validate_grid(
            &self.families,
            &self.rhos,
            &self.estimators,
            self.workers,
            self.allow_negbin_high_rho,
        )?;
        validate_sizes(&self.sample_sizes, 4)
    }
}

/// Parameterization of the large-sample bias study.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BiasConfig {
    pub families: Vec<Family>,
    pub rhos: Vec<f64>,
    pub estimators: Vec<EstimatorKind>,
    pub pairs_per_rep: usize,
    pub reps: usize,
    pub seed: u64,
    pub workers: usize,
    pub allow_negbin_high_rho: bool,
}

impl Default for BiasConfig {
    fn default() -> Self {
        Self {
            families: vec![Family::STANDARD_POISSON, Family::STANDARD_NEGBIN],
            rhos: crate::DEFAULT_RHOS.to_vec(),
            estimators: EstimatorKind::ALL.to_vec(),
            pairs_per_rep: 1_000_000,
            reps: 1000,
            seed: 0,
            workers: 1,
            allow_negbin_high_rho: false,
        }
    }
}

impl BiasConfig {
    pub fn validate(&self) -> Result<()> {
        if self.reps < 2 {
            return Err(invalid("reps must be at least 2"));
        }
        if self.pairs_per_rep < 2 {
            return Err(invalid("pairs_per_rep must be at least 2"));
        }
        validate_grid(
            &self.families,
            &self.rhos,
            &self.estimators,
            self.workers,
            self.allow_negbin_high_rho,
        )
    }
}

/// Parameterization of the MSE sweep over a correlation grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MseConfig {
    pub families: Vec<Family>,
    pub rhos: Vec<f64>,
    pub sample_sizes: Vec<usize>,
    pub estimators: Vec<EstimatorKind>,
    pub reps: usize,
    pub seed: u64,
    pub workers: usize,
}

impl Default for MseConfig {
    fn default() -> Self {
        Self {
            families: vec![Family::STANDARD_POISSON, Family::STANDARD_NEGBIN],
            rhos: rho_grid(0.05, 0.95, 0.01).expect("valid default grid"),
            sample_sizes: crate::DEFAULT_SAMPLE_SIZES.to_vec(),
            estimators: EstimatorKind::ALL.to_vec(),
            reps: 1000,
            seed: 0,
            workers: 1,
        }
    }
}

impl MseConfig {
    pub fn validate(&self) -> Result<()> {
        if self.reps < 2 {
            return Err(invalid("reps must be at least 2"));
        }
        // the MSE sweep covers the whole grid for both families
        validate_grid(&self.families, &self.rhos, &self.estimators, self.workers, true)?;
        validate_sizes(&self.sample_sizes, 2)
    }
}

/// Inclusive arithmetic grid `start, start+step, …, stop`, with each value
/// rounded to 12 decimals so `0.05:0.95:0.01` yields exactly 91 clean values.
pub fn rho_grid(start: f64, stop: f64, step: f64) -> Result<Vec<f64>> {
    if !(step > 0.0) || !(stop >= start) {
        return Err(invalid(format!("invalid grid {start}:{stop}:{step}")));
    }
    let count = ((stop - start) / step + 1e-9).floor() as usize + 1;
    Ok((0..count)
        .map(|i| ((start + i as f64 * step) * 1e12).round() / 1e12)
        .collect())
}

fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidParameter(msg.into())
}

fn nonempty<T>(items: &[T], what: &str) -> Result<()> {
    if items.is_empty() {
        Err(invalid(format!("{what} must not be empty")))
    } else {
        Ok(())
    }
}

fn validate_sizes(sizes: &[usize], min: usize) -> Result<()> {
    nonempty(sizes, "sample_sizes")?;
    if let Some(n) = sizes.iter().find(|&&n| n < min) {
        return Err(invalid(format!("sample sizes must be at least {min}, got {n}")));
    }
    Ok(())
}

fn validate_grid(
    families: &[Family],
    rhos: &[f64],
    estimators: &[EstimatorKind],
    workers: usize,
    allow_negbin_high_rho: bool,
) -> Result<()> {
    nonempty(families, "families")?;
    nonempty(rhos, "target correlations")?;
    nonempty(estimators, "estimators")?;
    if workers < 1 {
        return Err(invalid("workers must be at least 1"));
    }
    for family in families {
        let targets = targets_for(family, rhos, allow_negbin_high_rho);
        if targets.is_empty() {
            return Err(invalid(format!(
                "no usable target for {}: negative binomial targets >= {NEGBIN_RHO_LIMIT} \
                 need the high-correlation override",
                family.label()
            )));
        }
        for rho in targets {
            family.solve(rho).map_err(|e| {
                e.in_combination(format!("solving {} for rho = {rho}", family.label()))
            })?;
        }
    }
    Ok(())
}

/// The targets of `rhos` that a family is run at. Negative binomial targets
/// at or above [`NEGBIN_RHO_LIMIT`] are dropped unless explicitly allowed.
pub(crate) fn targets_for(family: &Family, rhos: &[f64], allow_negbin_high_rho: bool) -> Vec<f64> {
    rhos.iter()
        .copied()
        .filter(|&rho| {
            allow_negbin_high_rho
                || !matches!(family, Family::NegBin { .. })
                || rho < NEGBIN_RHO_LIMIT
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_counts() {
        let g = rho_grid(0.05, 0.95, 0.01).unwrap();
        assert_eq!(g.len(), 91);
        assert_eq!(g[0], 0.05);
        assert_eq!(g[90], 0.95);
        assert_eq!(g[37], 0.42);
        assert_eq!(rho_grid(0.05, 0.95, 0.05).unwrap().len(), 19);
        assert!(rho_grid(0.5, 0.1, 0.1).is_err());
    }

    #[test]
    fn negbin_high_rho_needs_override() {
        let mut cfg = StudyConfig {
            families: vec![Family::STANDARD_NEGBIN],
            rhos: vec![0.9],
            ..StudyConfig::default()
        };
        assert!(cfg.validate().is_err());
        cfg.allow_negbin_high_rho = true;
        cfg.validate().unwrap();
        assert_eq!(targets_for(&Family::STANDARD_NEGBIN, &crate::DEFAULT_RHOS, false), [0.25, 0.5, 0.75]);
        assert_eq!(targets_for(&Family::STANDARD_POISSON, &crate::DEFAULT_RHOS, false).len(), 4);
    }

    #[test]
    fn rejects_bad_values() {
        let ok = StudyConfig::default();
        ok.validate().unwrap();
        for bad in [
            StudyConfig { n_sims: 0, ..ok.clone() },
            StudyConfig { b: 0, ..ok.clone() },
            StudyConfig { alpha: 0.7, ..ok.clone() },
            StudyConfig { sample_sizes: vec![3], ..ok.clone() },
            StudyConfig { rhos: vec![1.0], ..ok.clone() },
            StudyConfig { workers: 0, ..ok.clone() },
            StudyConfig { methods: vec![], ..ok.clone() },
        ] {
            assert!(bad.validate().is_err(), "{bad:?}");
        }
    }
}
