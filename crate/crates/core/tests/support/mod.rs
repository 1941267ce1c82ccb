//! Oracles and property checks shared by the property tests and the
//! acceptance runner. Each check returns `Err` with a description instead of
//! panicking so the runner can report it.
#![allow(dead_code)]

use corrboot::estimators::{midranks, spearman_rho};
use corrboot::harness::{run_coverage_study, write_coverage_csv, NullSink, StudyConfig};
use corrboot::intervals::{bca_with_constants, ci_basic, ci_fisher, ci_percentile};
use corrboot::resampling::{jackknife_influence_negative, jackknife_influence_positive};
use corrboot::{BootstrapDistribution, DistributionSpec, EstimatorKind, Family, Method, PairedSample};
use rand::Rng;
use statrs::function::gamma::gamma_ur;

pub type Check = Result<(), String>;

pub fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Check {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

/// Plain two-pass Pearson correlation, written independently of the library.
pub fn naive_pearson(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    sxy / (sxx * syy).sqrt()
}

/// Mid-ranks by counting: rank = #{smaller} + (#{equal} + 1)/2.
pub fn naive_midranks(v: &[u32]) -> Vec<f64> {
    v.iter()
        .map(|&a| {
            let less = v.iter().filter(|&&b| b < a).count() as f64;
            let equal = v.iter().filter(|&&b| b == a).count() as f64;
            less + (equal + 1.0) / 2.0
        })
        .collect()
}

pub fn random_sample<R: Rng>(rng: &mut R, n: usize, max: u32) -> PairedSample {
    loop {
        let xs: Vec<u32> = (0..n).map(|_| rng.random_range(0..=max)).collect();
        let ys: Vec<u32> = (0..n).map(|_| rng.random_range(0..=max)).collect();
        let s = PairedSample::new(xs, ys).unwrap();
        if spearman_rho(&s).is_ok() {
            return s;
        }
    }
}

pub fn spearman_is_midrank_pearson(s: &PairedSample) -> Check {
    let rho = spearman_rho(s).map_err(|e| e.to_string())?;
    let (rx, ry) = (naive_midranks(s.xs()), naive_midranks(s.ys()));
    ensure(midranks(s.xs()) == rx && midranks(s.ys()) == ry, || format!("midranks differ on {s:?}"))?;
    let direct = naive_pearson(&rx, &ry);
    ensure((rho - direct).abs() <= 1e-12, || format!("spearman {rho} vs midrank pearson {direct}"))
}

pub fn percentile_respects_transforms(replicates: &[f64], theta: f64, alpha: f64) -> Check {
    let base = ci_percentile(&BootstrapDistribution::from_replicates(theta, replicates.to_vec()), alpha)
        .map_err(|e| e.to_string())?;
    let transforms: [(&str, fn(f64) -> f64); 2] = [("tanh", f64::tanh), ("cube", |x| x * x * x)];
    for (name, g) in transforms {
        let mapped: Vec<f64> = replicates.iter().map(|&v| g(v)).collect();
        let ci = ci_percentile(&BootstrapDistribution::from_replicates(g(theta), mapped), alpha)
            .map_err(|e| e.to_string())?;
        ensure(ci.lower == g(base.lower) && ci.upper == g(base.upper), || {
            format!("{name}: [{}, {}] vs g([{}, {}])", ci.lower, ci.upper, base.lower, base.upper)
        })?;
    }
    Ok(())
}

pub fn bca_without_corrections_is_percentile(replicates: &[f64], theta: f64, alpha: f64) -> Check {
    let dist = BootstrapDistribution::from_replicates(theta, replicates.to_vec());
    let p = ci_percentile(&dist, alpha).map_err(|e| e.to_string())?;
    let b = bca_with_constants(&dist, 0.0, 0.0, alpha, Method::BcaNeg).map_err(|e| e.to_string())?;
    ensure(p.lower == b.lower && p.upper == b.upper, || {
        format!("percentile [{}, {}] vs BCa(0,0) [{}, {}] at B={}", p.lower, p.upper, b.lower, b.upper, replicates.len())
    })
}

pub fn basic_reflects_percentile(replicates: &[f64], theta: f64, alpha: f64) -> Check {
    let dist = BootstrapDistribution::from_replicates(theta, replicates.to_vec());
    let p = ci_percentile(&dist, alpha).map_err(|e| e.to_string())?;
    let b = ci_basic(&dist, alpha).map_err(|e| e.to_string())?;
    let tol = 1e-12 * (1.0 + theta.abs());
    ensure((b.lower + p.upper - 2.0 * theta).abs() <= tol, || format!("lower_b + upper_p = {}", b.lower + p.upper))?;
    ensure((b.upper + p.lower - 2.0 * theta).abs() <= tol, || format!("upper_b + lower_p = {}", b.upper + p.lower))
}

/// Both jackknife variants of the mean of `xs` give `x_i − x̄`.
pub fn jackknife_of_mean(xs: &[u32]) -> Check {
    let mean = |a: &[u32], _: &[u32]| Some(a.iter().map(|&v| v as f64).sum::<f64>() / a.len() as f64);
    let s = PairedSample::new(xs.to_vec(), vec![0; xs.len()]).map_err(|e| e.to_string())?;
    let xbar = xs.iter().map(|&v| v as f64).sum::<f64>() / xs.len() as f64;
    let neg = jackknife_influence_negative(&s, &mean).map_err(|e| e.to_string())?;
    let pos = jackknife_influence_positive(&s, &mean).map_err(|e| e.to_string())?;
    for (i, &x) in xs.iter().enumerate() {
        let want = x as f64 - xbar;
        let tol = 1e-9 * (1.0 + want.abs());
        ensure((neg.values[i] - want).abs() <= tol, || format!("negative I_{i} = {} vs {want}", neg.values[i]))?;
        ensure((pos.values[i] - want).abs() <= tol, || format!("positive I_{i} = {} vs {want}", pos.values[i]))?;
    }
    Ok(())
}

pub fn fisher_stays_inside(r: f64, n: usize, alpha: f64) -> Check {
    let ci = ci_fisher(r, n, alpha).map_err(|e| e.to_string())?;
    ensure(-1.0 < ci.lower && ci.lower <= ci.upper && ci.upper < 1.0, || {
        format!("r={r}, n={n}: [{}, {}]", ci.lower, ci.upper)
    })?;
    ensure(!ci.exceeds_range, || "exceeds_range set".into())?;
    ensure(ci.clamped_r == (r.abs() > 1.0 - 1e-12), || format!("clamp flag {} at r={r}", ci.clamped_r))
}

/// Standard parameter sets: Poisson at the four targets (λ1=0.5, λ2=1) and the
/// three reference negative binomial settings.
pub fn standard_parameter_sets() -> Vec<DistributionSpec> {
    let mut sets: Vec<DistributionSpec> = [0.25, 0.5, 0.75, 0.9]
        .iter()
        .map(|&rho| Family::STANDARD_POISSON.solve(rho).unwrap())
        .collect();
    for (p1, p2) in [(0.1393, 0.2786), (0.2287, 0.4574), (0.2898, 0.5796)] {
        sets.push(DistributionSpec::NegBin(corrboot::BivariateNegBinParams::new(5, p1, p2).unwrap()));
    }
    sets
}

/// Grid edge beyond which the mass of `spec` is far below 1e−10.
pub fn support_edge(spec: &DistributionSpec) -> u64 {
    match spec {
        DistributionSpec::Poisson(_) => 80,
        DistributionSpec::NegBin(_) => 260,
    }
}

pub fn pmf_normalizes(spec: &DistributionSpec) -> Check {
    let g = support_edge(spec);
    let total: f64 = (0..=g).flat_map(|x| (0..=g).map(move |y| (x, y))).map(|(x, y)| spec.pmf(x, y)).sum();
    ensure((total - 1.0).abs() <= 1e-8, || format!("{}: total mass {total}", spec.params_string()))
}

/// Chi-square goodness of fit of `draws` sampled pairs against the PMF on
/// cells with expected count ≥ 5; the remaining cells are pooled into one.
/// Returns the p-value.
pub fn chi_square_p_value<R: Rng>(spec: &DistributionSpec, draws: usize, rng: &mut R) -> f64 {
    let sample = spec.sample(draws, rng).unwrap();
    let mut counts = std::collections::HashMap::<(u32, u32), f64>::new();
    for p in sample.pairs() {
        *counts.entry(p).or_default() += 1.0;
    }
    let g = support_edge(spec) as u32;
    let (mut stat, mut cells) = (0.0, 0usize);
    let (mut pooled_obs, mut pooled_exp) = (draws as f64, draws as f64);
    for x in 0..=g {
        for y in 0..=g {
            let expected = spec.pmf(x as u64, y as u64) * draws as f64;
            if expected >= 5.0 {
                let observed = counts.get(&(x, y)).copied().unwrap_or(0.0);
                stat += (observed - expected).powi(2) / expected;
                cells += 1;
                pooled_obs -= observed;
                pooled_exp -= expected;
            }
        }
    }
    if pooled_exp >= 5.0 {
        stat += (pooled_obs - pooled_exp).powi(2) / pooled_exp;
        cells += 1;
    }
    let df = (cells - 1) as f64;
    gamma_ur(df / 2.0, stat / 2.0)
}

/// Population Spearman correlation with mid-rank scores:
/// corr(F_X(x−) + p_X(x)/2, F_Y(y−) + p_Y(y)/2) under the joint PMF.
pub fn population_spearman(spec: &DistributionSpec) -> f64 {
    let g = support_edge(spec) as usize;
    let joint: Vec<Vec<f64>> = (0..=g).map(|x| (0..=g).map(|y| spec.pmf(x as u64, y as u64)).collect()).collect();
    let px: Vec<f64> = joint.iter().map(|row| row.iter().sum()).collect();
    let py: Vec<f64> = (0..=g).map(|y| joint.iter().map(|row| row[y]).sum()).collect();
    let scores = |p: &[f64]| -> Vec<f64> {
        let mut below = 0.0;
        p.iter()
            .map(|&m| {
                let s = below + m / 2.0;
                below += m;
                s
            })
            .collect()
    };
    let (sx, sy) = (scores(&px), scores(&py));
    let mean = |s: &[f64], p: &[f64]| s.iter().zip(p).map(|(a, b)| a * b).sum::<f64>();
    let (mx, my) = (mean(&sx, &px), mean(&sy, &py));
    let var = |s: &[f64], p: &[f64], m: f64| s.iter().zip(p).map(|(a, b)| (a - m).powi(2) * b).sum::<f64>();
    let mut cov = 0.0;
    for x in 0..=g {
        for y in 0..=g {
            cov += (sx[x] - mx) * (sy[y] - my) * joint[x][y];
        }
    }
    cov / (var(&sx, &px, mx) * var(&sy, &py, my)).sqrt()
}

/// Sorted coverage CSVs for the same 4-combination config at 1 and 8 workers.
pub fn coverage_csv_at(workers: usize) -> String {
    let config = StudyConfig {
        families: vec![Family::STANDARD_POISSON, Family::STANDARD_NEGBIN],
        rhos: vec![0.5],
        sample_sizes: vec![10, 20],
        estimators: vec![EstimatorKind::Pearson],
        methods: Method::ALL.to_vec(),
        n_sims: 10,
        b: 100,
        seed: 2718,
        workers,
        ..StudyConfig::default()
    };
    let out = run_coverage_study(&config, &mut NullSink).unwrap();
    let mut buf = Vec::new();
    write_coverage_csv(&mut buf, &out.rows, false).unwrap();
    String::from_utf8(buf).unwrap()
}
