//! The eight interval constructions: Normal, Basic, Percentile, BCa with
//! either jackknife, ABC, Studentized, and Fisher's z.
//!
//! Every constructor takes `alpha`, the probability in each tail; the
//! nominal coverage of the returned interval is `1 − 2·alpha`. Endpoints are
//! never clipped to `[−1, 1]`; `exceeds_range` reports when they leave it.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::{correlation, fisher_z, fisher_z_inv, pearson_se, sample_sd, EstimatorKind};
use crate::normal;
use crate::resampling::{
    acceleration, bias_correction_z0, jackknife_influence_negative, jackknife_influence_positive,
    resample_into, BootstrapDistribution, InfluenceValues, REDRAW_BUDGET_FACTOR,
};
use crate::sample::PairedSample;
use crate::seeding::{self, TAG_STUDENTIZED};

pub use crate::abc::{abc_interval, ci_abc, AbcDetails};

/// `|r|` is clamped to this before the Fisher transform.
pub const FISHER_CLAMP: f64 = 1.0 - 1e-12;

const SINGULAR_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Method {
    Normal,
    Basic,
    Percentile,
    #[serde(rename = "BCa_neg")]
    BcaNeg,
    #[serde(rename = "BCa_pos")]
    BcaPos,
    #[serde(rename = "ABC")]
    Abc,
    Studentized,
    Fisher,
}

impl Method {
    pub const ALL: [Method; 8] = [
        Method::Normal,
        Method::Basic,
        Method::Percentile,
        Method::Abc,
        Method::BcaNeg,
        Method::BcaPos,
        Method::Studentized,
        Method::Fisher,
    ];

    /// Tag written to reports and CSV output.
    pub fn label(&self) -> &'static str {
        match self {
            Method::Normal => "Normal",
            Method::Basic => "Basic",
            Method::Percentile => "Percentile",
            Method::BcaNeg => "BCa_neg",
            Method::BcaPos => "BCa_pos",
            Method::Abc => "ABC",
            Method::Studentized => "Studentized",
            Method::Fisher => "Fisher",
        }
    }

    /// Whether the method reads the shared bootstrap replicate set.
    pub fn uses_bootstrap(&self) -> bool {
        !matches!(self, Method::Abc | Method::Fisher)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key: String = s
            .chars()
            .filter(|c| !matches!(c, '-' | '_'))
            .collect::<String>()
            .to_ascii_lowercase();
        Ok(match key.as_str() {
            "normal" => Method::Normal,
            "basic" => Method::Basic,
            "percentile" => Method::Percentile,
            "bcaneg" => Method::BcaNeg,
            "bcapos" => Method::BcaPos,
            "abc" => Method::Abc,
            "studentized" => Method::Studentized,
            "fisher" => Method::Fisher,
            _ => return Err(Error::InvalidParameter(format!("unknown method '{s}'"))),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConfidenceInterval {
    pub lower: f64,
    pub upper: f64,
    pub method: Method,
    /// Nominal coverage `1 − 2·alpha`.
    pub nominal: f64,
    pub alpha: f64,
    /// Some endpoint lies outside `[−1, 1]`.
    pub exceeds_range: bool,
    /// BCa only: the below-`θ̂` proportion was 0 or 1 and got clamped.
    pub clamped_z0: bool,
    /// Fisher only: `|r|` was clamped away from 1.
    pub clamped_r: bool,
    /// Studentized only: replicates redrawn because their SE was zero.
    pub redraws: usize,
}

impl ConfidenceInterval {
    pub(crate) fn new(a: f64, b: f64, method: Method, alpha: f64) -> Self {
        let (lower, upper) = if a <= b { (a, b) } else { (b, a) };
        Self {
            lower,
            upper,
            method,
            nominal: 1.0 - 2.0 * alpha,
            alpha,
            exceeds_range: lower < -1.0 || upper > 1.0,
            clamped_z0: false,
            clamped_r: false,
            redraws: 0,
        }
    }

    pub fn length(&self) -> f64 {
        self.upper - self.lower
    }

    /// Length after clipping both endpoints into `[−1, 1]`.
    pub fn clipped_length(&self) -> f64 {
        self.upper.clamp(-1.0, 1.0) - self.lower.clamp(-1.0, 1.0)
    }

    pub fn contains(&self, value: f64) -> bool {
        self.lower <= value && value <= self.upper
    }
}

pub(crate) fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha <= 0.5 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("alpha must lie in (0, 0.5], got {alpha}")))
    }
}

/// `θ̂ ± z_{1−α}·SE`, with SE the standard deviation of the replicates.
pub fn ci_normal(dist: &BootstrapDistribution, alpha: f64) -> Result<ConfidenceInterval> {
    check_alpha(alpha)?;
    if dist.b() < 2 {
        return Err(Error::InvalidParameter("the Normal method needs B >= 2".into()));
    }
    let se = sample_sd(dist.replicates());
    if !(se > 0.0) {
        return Err(Error::ZeroSpread);
    }
    let half = normal::quantile(1.0 - alpha) * se;
    let t = dist.theta_hat();
    Ok(ConfidenceInterval::new(t - half, t + half, Method::Normal, alpha))
}

pub fn ci_percentile(dist: &BootstrapDistribution, alpha: f64) -> Result<ConfidenceInterval> {
    check_alpha(alpha)?;
    Ok(ConfidenceInterval::new(
        dist.quantile(alpha),
        dist.quantile(1.0 - alpha),
        Method::Percentile,
        alpha,
    ))
}

/// Reflected percentile interval `[2θ̂ − Ĝ⁻¹(1−α), 2θ̂ − Ĝ⁻¹(α)]`.
pub fn ci_basic(dist: &BootstrapDistribution, alpha: f64) -> Result<ConfidenceInterval> {
    check_alpha(alpha)?;
    let t2 = 2.0 * dist.theta_hat();
    Ok(ConfidenceInterval::new(
        t2 - dist.quantile(1.0 - alpha),
        t2 - dist.quantile(alpha),
        Method::Basic,
        alpha,
    ))
}

/// Percentile level used by BCa for a nominal normal quantile `z`:
/// `Φ(z0 + (z0 + z)/(1 − a(z0 + z)))`.
pub fn bca_level(z0: f64, a: f64, z: f64) -> Result<f64> {
    let w = z0 + z;
    let denom = 1.0 - a * w;
    if denom.abs() < SINGULAR_TOLERANCE {
        return Err(Error::SingularDenominator { level: normal::cdf(z) });
    }
    Ok(normal::cdf(z0 + w / denom))
}

/// BCa endpoints for given bias correction and acceleration constants.
pub fn bca_with_constants(
    dist: &BootstrapDistribution,
    z0: f64,
    a: f64,
    alpha: f64,
    method: Method,
) -> Result<ConfidenceInterval> {
    check_alpha(alpha)?;
    let lo = bca_level(z0, a, normal::quantile(alpha))?;
    let hi = bca_level(z0, a, normal::quantile(1.0 - alpha))?;
    Ok(ConfidenceInterval::new(dist.quantile(lo), dist.quantile(hi), method, alpha))
}

/// Bias-corrected and accelerated interval. The method tag follows the
/// influence values: negative jackknife gives `BCa_neg`, anything else `BCa_pos`.
pub fn ci_bca(
    dist: &BootstrapDistribution,
    influence: &InfluenceValues,
    alpha: f64,
) -> Result<ConfidenceInterval> {
    let a = acceleration(influence)?;
    let bc = bias_correction_z0(dist);
    let method = match influence.kind {
        crate::resampling::InfluenceKind::NegativeJackknife => Method::BcaNeg,
        _ => Method::BcaPos,
    };
    let mut ci = bca_with_constants(dist, bc.z0, a, alpha, method)?;
    ci.clamped_z0 = bc.clamped;
    Ok(ci)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StudentizedSEPolicy {
    /// `(1 − r²)/sqrt(n − 3)` evaluated at each replicate and at `θ̂`.
    PearsonAnalytic,
    /// A single simulated SE used for every replicate and for `θ̂`.
    SpearmanSimulated(f64),
}

/// Bootstrap-t interval `[θ̂ − Ĝ_s⁻¹(1−α)·SE(θ̂), θ̂ − Ĝ_s⁻¹(α)·SE(θ̂)]` on
/// `t* = (θ* − θ̂)/SE(θ*)`.
///
/// Under [`StudentizedSEPolicy::PearsonAnalytic`], a replicate with `|θ*| = 1`
/// has zero SE; it is replaced by a fresh resample of `sample` drawn from a
/// stream keyed by the distribution's seed and the replicate index.
pub fn ci_studentized(
    sample: &PairedSample,
    dist: &BootstrapDistribution,
    policy: StudentizedSEPolicy,
    alpha: f64,
) -> Result<ConfidenceInterval> {
    check_alpha(alpha)?;
    let theta = dist.theta_hat();
    let n = sample.len();
    let (pivots, se_hat, redraws) = match policy {
        StudentizedSEPolicy::SpearmanSimulated(se) => {
            if !(se > 0.0) {
                return Err(Error::InvalidParameter(format!(
                    "simulated SE must be positive, got {se}"
                )));
            }
            let pivots = dist.replicates().iter().map(|v| (v - theta) / se).collect();
            (pivots, se, 0)
        }
        StudentizedSEPolicy::PearsonAnalytic => {
            let se_hat = pearson_se(theta, n)?;
            let budget = REDRAW_BUDGET_FACTOR * dist.b();
            let mut redraws = 0;
            let mut xs = vec![0u32; n];
            let mut ys = vec![0u32; n];
            let mut pivots = Vec::with_capacity(dist.b());
            for (i, &rep) in dist.replicates().iter().enumerate() {
                let mut value = rep;
                if !(value.abs() < 1.0) {
                    let mut rng = seeding::stream(dist.seed(), &[TAG_STUDENTIZED, i as u64]);
                    loop {
                        if redraws >= budget {
                            return Err(Error::RedrawBudgetExhausted { budget });
                        }
                        redraws += 1;
                        resample_into(sample, &mut rng, &mut xs, &mut ys);
                        if let Ok(r) = correlation(&xs, &ys) {
                            if r.abs() < 1.0 {
                                value = r;
                                break;
                            }
                        }
                    }
                }
                pivots.push((value - theta) / pearson_se(value, n)?);
            }
            (pivots, se_hat, redraws)
        }
    };
    let pivots = BootstrapDistribution::from_replicates(0.0, pivots);
    let mut ci = ConfidenceInterval::new(
        theta - pivots.quantile(1.0 - alpha) * se_hat,
        theta - pivots.quantile(alpha) * se_hat,
        Method::Studentized,
        alpha,
    );
    ci.redraws = redraws;
    Ok(ci)
}

/// Fisher z interval `tanh(atanh(r) ± z_{1−α}/sqrt(n − 3))`. `|r|` is clamped
/// to [`FISHER_CLAMP`] first; both endpoints stay strictly inside `(−1, 1)`.
pub fn ci_fisher(r: f64, n: usize, alpha: f64) -> Result<ConfidenceInterval> {
    check_alpha(alpha)?;
    if n < 4 {
        return Err(Error::Domain(format!("the Fisher interval needs n >= 4, got {n}")));
    }
    if r.is_nan() || r.abs() > 1.0 {
        return Err(Error::Domain(format!("correlation must lie in [-1, 1], got {r}")));
    }
    let clamped = r.clamp(-FISHER_CLAMP, FISHER_CLAMP);
    let phi = fisher_z(clamped)?;
    let half = normal::quantile(1.0 - alpha) / ((n - 3) as f64).sqrt();
    let inside = |v: f64| v.clamp((-1.0f64).next_up(), 1.0f64.next_down());
    let mut ci = ConfidenceInterval::new(
        inside(fisher_z_inv(phi - half)),
        inside(fisher_z_inv(phi + half)),
        Method::Fisher,
        alpha,
    );
    ci.clamped_r = clamped != r;
    Ok(ci)
}

/// Interval of one `method` for `sample`. `theta` is the estimate on the
/// full sample; `dist` is the bootstrap distribution shared by the resampling
/// methods and `spearman_se` the simulated SE used by Studentized/Spearman.
pub fn ci_for_method(
    sample: &PairedSample,
    estimator: EstimatorKind,
    theta: f64,
    method: Method,
    dist: Option<&BootstrapDistribution>,
    spearman_se: Option<f64>,
    alpha: f64,
) -> Result<ConfidenceInterval> {
    let dist = || {
        dist.ok_or_else(|| {
            Error::InvalidParameter(format!("{method} needs a bootstrap distribution"))
        })
    };
    match method {
        Method::Normal => ci_normal(dist()?, alpha),
        Method::Basic => ci_basic(dist()?, alpha),
        Method::Percentile => ci_percentile(dist()?, alpha),
        Method::BcaNeg => ci_bca(dist()?, &jackknife_influence_negative(sample, &estimator)?, alpha),
        Method::BcaPos => ci_bca(dist()?, &jackknife_influence_positive(sample, &estimator)?, alpha),
        Method::Abc => ci_abc(sample, estimator, alpha),
        Method::Studentized => {
            let policy = match estimator {
                EstimatorKind::Pearson => StudentizedSEPolicy::PearsonAnalytic,
                EstimatorKind::Spearman => StudentizedSEPolicy::SpearmanSimulated(spearman_se.ok_or_else(
                    || Error::InvalidParameter("Studentized Spearman needs a simulated SE".into()),
                )?),
            };
            ci_studentized(sample, dist()?, policy, alpha)
        }
        Method::Fisher => ci_fisher(theta, sample.len(), alpha),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimators::EstimatorKind;
    use crate::resampling::{bootstrap_replicates, InfluenceKind};

    fn seq(theta: f64, values: &[f64]) -> BootstrapDistribution {
        BootstrapDistribution::from_replicates(theta, values.to_vec())
    }

    #[test]
    fn method_names_round_trip() {
        for m in Method::ALL {
            assert_eq!(m.label().parse::<Method>().unwrap(), m);
        }
        assert_eq!("bca-neg".parse::<Method>().unwrap(), Method::BcaNeg);
        assert!("wald".parse::<Method>().is_err());
    }

    #[test]
    fn normal_interval_half_width() {
        // sd of {0.4, 0.6} is sqrt(0.02)
        let d = seq(0.5, &[0.4, 0.6]);
        let ci = ci_normal(&d, 0.025).unwrap();
        let half = 1.959_963_984_540_054 * 0.02f64.sqrt();
        assert!((ci.lower - (0.5 - half)).abs() < 1e-12);
        assert!((ci.upper - (0.5 + half)).abs() < 1e-12);

        // replicates with sd exactly 0.1
        let reps: Vec<f64> = [-1.0, 1.0].iter().map(|s| 0.5 + s * 0.1 / 2f64.sqrt()).collect();
        let ci = ci_normal(&seq(0.5, &reps), 0.025).unwrap();
        assert!((ci.lower - 0.304).abs() < 5e-4 && (ci.upper - 0.696).abs() < 5e-4);

        let ci = ci_normal(&d, 0.5).unwrap();
        assert_eq!((ci.lower, ci.upper), (0.5, 0.5));
        assert_eq!(ci.nominal, 0.0);

        assert!(matches!(ci_normal(&seq(0.5, &[0.3, 0.3]), 0.025), Err(Error::ZeroSpread)));
        assert!(ci_normal(&seq(0.5, &[0.3]), 0.025).is_err());
    }

    #[test]
    fn percentile_and_basic_hand_cases() {
        let reps: Vec<f64> = (1..=20).map(f64::from).collect();
        let ci = ci_percentile(&seq(10.0, &reps), 0.05).unwrap();
        assert_eq!((ci.lower, ci.upper), (1.0, 19.0));
        let ci = ci_percentile(&seq(0.0, &[0.7; 5]), 0.025).unwrap();
        assert_eq!((ci.lower, ci.upper), (0.7, 0.7));

        // percentile [0.2, 0.8] around 0.5 reflects onto itself
        let d = seq(0.5, &[0.2, 0.5, 0.8]);
        let p = ci_percentile(&d, 0.3).unwrap();
        let b = ci_basic(&d, 0.3).unwrap();
        assert_eq!((p.lower, p.upper), (0.2, 0.8));
        assert!((b.lower - 0.2).abs() < 1e-15 && (b.upper - 0.8).abs() < 1e-15);

        let d = seq(0.5, &[0.4, 0.6, 0.9]);
        let b = ci_basic(&d, 0.3).unwrap();
        assert!((b.lower - 0.1).abs() < 1e-15 && (b.upper - 0.6).abs() < 1e-15);
    }

    /// Independent evaluation of the BCa endpoint formula at alpha = 0.025.
    fn bca_oracle(sorted: &[f64], z0: f64, a: f64) -> (f64, f64) {
        let b = sorted.len() as f64;
        let pick = |z: f64| {
            let zz = z0 + (z0 + z) / (1.0 - a * (z0 + z));
            let level = 0.5 * statrs::function::erf::erfc(-zz / std::f64::consts::SQRT_2);
            let k = ((level * b).ceil() as usize).clamp(1, sorted.len());
            sorted[k - 1]
        };
        let (lo, hi) = (pick(-1.959_963_984_540_054), pick(1.959_963_984_540_054));
        (lo.min(hi), lo.max(hi))
    }

    #[test]
    fn bca_matches_independent_formula() {
        let reps: Vec<f64> = (0..200).map(|i| ((i * 37) % 200) as f64 / 199.0).map(|u| u * u).collect();
        let d = seq(0.3, &reps);
        for (z0, a) in [(0.2, 0.05), (-0.3, -0.08), (0.0, 0.1), (0.4, 0.0)] {
            let ci = bca_with_constants(&d, z0, a, 0.025, Method::BcaNeg).unwrap();
            let (lo, hi) = bca_oracle(d.sorted(), z0, a);
            assert_eq!((ci.lower, ci.upper), (lo, hi), "z0 = {z0}, a = {a}");
        }
    }

    #[test]
    fn bc_levels_without_acceleration() {
        let z0 = 0.3;
        let z = normal::quantile(0.025);
        let level = bca_level(z0, 0.0, z).unwrap();
        assert!((level - normal::cdf(2.0 * z0 + z)).abs() < 1e-15);
    }

    #[test]
    fn bca_zero_constants_is_percentile() {
        let reps: Vec<f64> = (0..999).map(|i| ((i * 7919) % 999) as f64).collect();
        let d = seq(400.0, &reps);
        let bca = bca_with_constants(&d, 0.0, 0.0, 0.025, Method::BcaNeg).unwrap();
        let p = ci_percentile(&d, 0.025).unwrap();
        assert_eq!((bca.lower, bca.upper), (p.lower, p.upper));
    }

    #[test]
    fn bca_singular_denominator() {
        let d = seq(0.0, &[0.0, 1.0]);
        let z = normal::quantile(0.975);
        assert!(matches!(
            bca_with_constants(&d, 0.0, 1.0 / z, 0.025, Method::BcaPos),
            Err(Error::SingularDenominator { .. })
        ));
    }

    #[test]
    fn bca_tags_follow_influence_kind() {
        let d = seq(0.0, &[-1.0, 0.0, 1.0]);
        let inf = InfluenceValues { values: vec![-1.0, -1.0, 2.0], kind: InfluenceKind::PositiveJackknife };
        assert_eq!(ci_bca(&d, &inf, 0.1).unwrap().method, Method::BcaPos);
        let inf = InfluenceValues { values: vec![0.0; 3], kind: InfluenceKind::NegativeJackknife };
        assert!(matches!(ci_bca(&d, &inf, 0.1), Err(Error::ZeroInfluence)));
    }

    #[test]
    fn studentized_degenerate_and_basic_reduction() {
        let s = PairedSample::new(vec![0, 1, 2, 3, 5], vec![1, 1, 2, 4, 3]).unwrap();
        let d = seq(0.4, &[0.4; 10]);
        let ci = ci_studentized(&s, &d, StudentizedSEPolicy::PearsonAnalytic, 0.025).unwrap();
        assert_eq!((ci.lower, ci.upper), (0.4, 0.4));

        let d = bootstrap_replicates(&s, &EstimatorKind::Spearman, 300, 4).unwrap();
        let st = ci_studentized(&s, &d, StudentizedSEPolicy::SpearmanSimulated(1.0), 0.025).unwrap();
        let b = ci_basic(&d, 0.025).unwrap();
        assert!((st.lower - b.lower).abs() < 1e-12 && (st.upper - b.upper).abs() < 1e-12);
    }

    #[test]
    fn studentized_pearson_by_hand() {
        let s = PairedSample::new((0..10).collect(), vec![0, 2, 1, 3, 5, 4, 6, 9, 7, 8]).unwrap();
        let theta = 0.5;
        let reps = [0.2, 0.35, 0.45, 0.5, 0.55, 0.6, 0.7, 0.8, 0.1, 0.65];
        let d = seq(theta, &reps);
        let ci = ci_studentized(&s, &d, StudentizedSEPolicy::PearsonAnalytic, 0.1).unwrap();
        let se = |r: f64| (1.0 - r * r) / 7f64.sqrt();
        let mut t: Vec<f64> = reps.iter().map(|&r| (r - theta) / se(r)).collect();
        t.sort_by(|a, b| a.partial_cmp(b).unwrap());
        // k = ceil(0.1·10) = 1 and ceil(0.9·10) = 9
        let lower = theta - t[8] * se(theta);
        let upper = theta - t[0] * se(theta);
        assert!((ci.lower - lower).abs() < 1e-14 && (ci.upper - upper).abs() < 1e-14);
        assert_eq!(ci.redraws, 0);
    }

    #[test]
    fn studentized_redraws_unit_replicates() {
        let s = PairedSample::new(vec![0, 1, 2, 3, 4, 5], vec![0, 1, 3, 2, 4, 6]).unwrap();
        let d = bootstrap_replicates(&s, &EstimatorKind::Pearson, 400, 8).unwrap();
        let unit = d.replicates().iter().filter(|r| r.abs() >= 1.0).count();
        assert!(unit > 0);
        let ci = ci_studentized(&s, &d, StudentizedSEPolicy::PearsonAnalytic, 0.025).unwrap();
        assert!(ci.redraws >= unit);
        assert!(ci.lower.is_finite() && ci.upper.is_finite());
    }

    #[test]
    fn fisher_cases() {
        let ci = ci_fisher(0.0, 103, 0.025).unwrap();
        let expect = (0.1f64 * 1.959_963_984_540_054).tanh();
        assert!((ci.upper - expect).abs() < 1e-15 && (ci.lower + expect).abs() < 1e-15);
        assert!((ci.upper - 0.19352).abs() < 1e-5);
        let ci = ci_fisher(1.0, 10, 0.025).unwrap();
        assert!(ci.clamped_r && ci.upper < 1.0 && ci.lower > -1.0);
        assert!(!ci.exceeds_range);
        assert!(ci_fisher(0.5, 3, 0.025).is_err());
    }
}
