//! Bivariate Poisson and bivariate negative binomial count distributions.
//!
//! Both families are parameterized so that the correlation is nonnegative.
//! The Poisson family is built by trivariate reduction, `X = U + W`,
//! `Y = V + W` with independent Poisson components of rates `λ1`, `λ2`, `λ3`.
//! The negative binomial family has joint mass
//! `(r+x+y−1)! / ((r−1)! x! y!) · p1^x p2^y (1−p1−p2)^r`, which is sampled
//! here as a gamma mixture of two conditionally independent Poisson counts.

use std::sync::OnceLock;

use rand::Rng;
use rand_distr::{Distribution, Gamma, Poisson};
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::sample::PairedSample;

/// Largest `k` whose `ln k!` is served from the precomputed table.
pub const LOG_FACTORIAL_CAP: usize = 10_000;

const SOLVER_TOLERANCE: f64 = 1e-12;
const SOLVER_MAX_ITER: usize = 200;

fn log_factorial_table() -> &'static [f64] {
    static TABLE: OnceLock<Vec<f64>> = OnceLock::new();
    TABLE.get_or_init(|| {
        let mut t = Vec::with_capacity(LOG_FACTORIAL_CAP + 1);
        t.push(0.0);
        let mut acc = 0.0;
        for k in 1..=LOG_FACTORIAL_CAP {
            acc += (k as f64).ln();
            t.push(acc);
        }
        t
    })
}

/// `ln k!`, tabulated up to [`LOG_FACTORIAL_CAP`] and via `ln Γ(k+1)` above.
pub fn ln_factorial(k: u64) -> f64 {
    match log_factorial_table().get(k as usize) {
        Some(&v) => v,
        None => ln_gamma(k as f64 + 1.0),
    }
}

/// `k · ln(rate)` with the convention `0 · ln 0 = 0`.
fn ln_power(rate: f64, k: u64) -> f64 {
    if k == 0 {
        0.0
    } else if rate == 0.0 {
        f64::NEG_INFINITY
    } else {
        k as f64 * rate.ln()
    }
}

fn log_sum_exp(terms: &[f64]) -> f64 {
    let max = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + terms.iter().map(|t| (t - max).exp()).sum::<f64>().ln()
}

fn poisson_draw<R: Rng + ?Sized>(rate: f64, rng: &mut R) -> u32 {
    if rate <= 0.0 {
        return 0;
    }
    let d = Poisson::new(rate).expect("finite positive Poisson rate");
    d.sample(rng) as u32
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BivariatePoissonParams {
    pub lambda1: f64,
    pub lambda2: f64,
    pub lambda3: f64,
}

impl BivariatePoissonParams {
    pub fn new(lambda1: f64, lambda2: f64, lambda3: f64) -> Result<Self> {
        for (name, v) in [("lambda1", lambda1), ("lambda2", lambda2), ("lambda3", lambda3)] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::InvalidParameter(format!(
                    "{name} must be a finite nonnegative rate, got {v}"
                )));
            }
        }
        Ok(Self { lambda1, lambda2, lambda3 })
    }

    /// Joint mass `P(X = x, Y = y)`, summed over the shared component in log space.
    pub fn pmf(&self, x: u64, y: u64) -> f64 {
        let total = self.lambda1 + self.lambda2 + self.lambda3;
        let terms: Vec<f64> = (0..=x.min(y))
            .map(|d| {
                ln_power(self.lambda1, x - d) + ln_power(self.lambda2, y - d)
                    + ln_power(self.lambda3, d)
                    - ln_factorial(x - d)
                    - ln_factorial(y - d)
                    - ln_factorial(d)
            })
            .collect();
        (log_sum_exp(&terms) - total).exp()
    }

    /// `λ3 / sqrt((λ1+λ3)(λ2+λ3))`.
    pub fn correlation(&self) -> Result<f64> {
        let vx = self.lambda1 + self.lambda3;
        let vy = self.lambda2 + self.lambda3;
        if vx <= 0.0 || vy <= 0.0 {
            return Err(Error::DegenerateParams(format!(
                "marginal variances are {vx} and {vy}; both must be positive"
            )));
        }
        Ok(self.lambda3 / (vx * vy).sqrt())
    }

    pub fn sample<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Result<PairedSample> {
        let mut xs = Vec::with_capacity(n);
        let mut ys = Vec::with_capacity(n);
        let u = (self.lambda1 > 0.0).then(|| Poisson::new(self.lambda1).expect("valid rate"));
        let v = (self.lambda2 > 0.0).then(|| Poisson::new(self.lambda2).expect("valid rate"));
        let w = (self.lambda3 > 0.0).then(|| Poisson::new(self.lambda3).expect("valid rate"));
        let draw = |d: &Option<Poisson<f64>>, rng: &mut R| -> u32 {
            d.as_ref().map_or(0, |d| d.sample(rng) as u32)
        };
        for _ in 0..n {
            let a = draw(&u, rng);
            let b = draw(&v, rng);
            let c = draw(&w, rng);
            xs.push(a + c);
            ys.push(b + c);
        }
        PairedSample::new(xs, ys)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BivariateNegBinParams {
    pub r: u32,
    pub p1: f64,
    pub p2: f64,
}

impl BivariateNegBinParams {
    pub fn new(r: u32, p1: f64, p2: f64) -> Result<Self> {
        if r == 0 {
            return Err(Error::InvalidParameter("r must be a positive integer".into()));
        }
        if !(0.0..1.0).contains(&p1) || !(0.0..1.0).contains(&p2) || p1 + p2 >= 1.0 {
            return Err(Error::InvalidParameter(format!(
                "need p1, p2 in [0, 1) with p1 + p2 < 1, got ({p1}, {p2})"
            )));
        }
        Ok(Self { r, p1, p2 })
    }

    fn remainder(&self) -> f64 {
        1.0 - self.p1 - self.p2
    }

    pub fn pmf(&self, x: u64, y: u64) -> f64 {
        let r = self.r as u64;
        let ln = ln_factorial(r + x + y - 1) - ln_factorial(r - 1) - ln_factorial(x)
            - ln_factorial(y)
            + ln_power(self.p1, x)
            + ln_power(self.p2, y)
            + r as f64 * self.remainder().ln();
        ln.exp()
    }

    /// `sqrt(p1 p2) / sqrt((1−p1)(1−p2))`.
    pub fn correlation(&self) -> f64 {
        (self.p1 * self.p2).sqrt() / ((1.0 - self.p1) * (1.0 - self.p2)).sqrt()
    }

    /// Draws `G ~ Gamma(r, 1)` and then independent Poisson counts with rates
    /// `G·p1/(1−p1−p2)` and `G·p2/(1−p1−p2)`. The joint generating function
    /// of the pair is `((1−p1−p2)/(1−p1 s−p2 t))^r`.
    pub fn sample<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Result<PairedSample> {
        let gamma = Gamma::new(self.r as f64, 1.0).expect("positive shape");
        let c = self.remainder();
        let (sx, sy) = (self.p1 / c, self.p2 / c);
        let mut xs = Vec::with_capacity(n);
        let mut ys = Vec::with_capacity(n);
        for _ in 0..n {
            let g: f64 = gamma.sample(rng);
            xs.push(poisson_draw(g * sx, rng));
            ys.push(poisson_draw(g * sy, rng));
        }
        PairedSample::new(xs, ys)
    }
}

/// One fully parameterized distribution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "lowercase")]
pub enum DistributionSpec {
    Poisson(BivariatePoissonParams),
    NegBin(BivariateNegBinParams),
}

impl DistributionSpec {
    pub fn label(&self) -> &'static str {
        match self {
            DistributionSpec::Poisson(_) => "poisson",
            DistributionSpec::NegBin(_) => "negbin",
        }
    }

    /// Parameter string used in CSV output, e.g. `lambda1=0.5;lambda2=1;lambda3=0.24`.
    pub fn params_string(&self) -> String {
        match self {
            DistributionSpec::Poisson(p) => format!(
                "lambda1={};lambda2={};lambda3={}",
                p.lambda1, p.lambda2, p.lambda3
            ),
            DistributionSpec::NegBin(p) => format!("r={};p1={};p2={}", p.r, p.p1, p.p2),
        }
    }

    pub fn pmf(&self, x: u64, y: u64) -> f64 {
        match self {
            DistributionSpec::Poisson(p) => p.pmf(x, y),
            DistributionSpec::NegBin(p) => p.pmf(x, y),
        }
    }

    pub fn correlation(&self) -> Result<f64> {
        match self {
            DistributionSpec::Poisson(p) => p.correlation(),
            DistributionSpec::NegBin(p) => Ok(p.correlation()),
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Result<PairedSample> {
        match self {
            DistributionSpec::Poisson(p) => p.sample(n, rng),
            DistributionSpec::NegBin(p) => p.sample(n, rng),
        }
    }
}

/// A one-parameter slice through a family, indexed by target correlation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "lowercase")]
pub enum Family {
    /// Fixed `λ1`, `λ2`; `λ3` is solved.
    Poisson { lambda1: f64, lambda2: f64 },
    /// Fixed `r` and `p2 = ratio·p1`; `p1` is solved.
    NegBin { r: u32, ratio: f64 },
}

impl Family {
    pub const STANDARD_POISSON: Family = Family::Poisson { lambda1: 0.5, lambda2: 1.0 };
    pub const STANDARD_NEGBIN: Family = Family::NegBin { r: 5, ratio: 2.0 };

    pub fn label(&self) -> &'static str {
        match self {
            Family::Poisson { .. } => "poisson",
            Family::NegBin { .. } => "negbin",
        }
    }

    pub fn solve(&self, rho: f64) -> Result<DistributionSpec> {
        match *self {
            Family::Poisson { lambda1, lambda2 } => {
                let lambda3 = solve_poisson_lambda3(rho, lambda1, lambda2)?;
                Ok(DistributionSpec::Poisson(BivariatePoissonParams::new(
                    lambda1, lambda2, lambda3,
                )?))
            }
            Family::NegBin { r, ratio } => {
                let (p1, p2) = solve_negbin_p(rho, ratio)?;
                Ok(DistributionSpec::NegBin(BivariateNegBinParams::new(r, p1, p2)?))
            }
        }
    }
}

fn bisect(mut lo: f64, mut hi: f64, target: f64, f: impl Fn(f64) -> f64) -> f64 {
    for _ in 0..SOLVER_MAX_ITER {
        if hi - lo <= SOLVER_TOLERANCE * hi.max(1.0) {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if f(mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// The `λ3` at which the bivariate Poisson with fixed `λ1`, `λ2` has correlation `rho`.
pub fn solve_poisson_lambda3(rho: f64, lambda1: f64, lambda2: f64) -> Result<f64> {
    if !(rho.is_finite() && rho >= 0.0) {
        return Err(Error::InvalidParameter(format!("rho must lie in [0, 1), got {rho}")));
    }
    if rho >= 1.0 {
        return Err(Error::NoSolution {
            rho,
            reason: "bivariate Poisson correlation is strictly below 1".into(),
        });
    }
    if !(lambda1 > 0.0 && lambda2 > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "lambda1 and lambda2 must be positive, got ({lambda1}, {lambda2})"
        )));
    }
    if rho == 0.0 {
        return Ok(0.0);
    }
    let corr = |l3: f64| l3 / ((lambda1 + l3) * (lambda2 + l3)).sqrt();
    let mut hi = 1.0;
    while corr(hi) < rho {
        hi *= 2.0;
        if !hi.is_finite() {
            return Err(Error::NoSolution { rho, reason: "bracket overflow".into() });
        }
    }
    Ok(bisect(0.0, hi, rho, corr))
}

/// `(p1, p2)` on the line `p2 = ratio·p1` whose negative binomial correlation is `rho`.
pub fn solve_negbin_p(rho: f64, ratio: f64) -> Result<(f64, f64)> {
    if !(ratio.is_finite() && ratio > 0.0) {
        return Err(Error::InvalidParameter(format!("ratio must be positive, got {ratio}")));
    }
    if !(rho > 0.0 && rho < 1.0) {
        return Err(Error::NoSolution {
            rho,
            reason: "negative binomial correlation on the line p2 = ratio·p1 spans (0, 1)".into(),
        });
    }
    let corr = |p1: f64| {
        let p2 = ratio * p1;
        (p1 * p2).sqrt() / ((1.0 - p1) * (1.0 - p2)).sqrt()
    };
    // p1 + p2 < 1 bounds p1 below 1/(1+ratio), where the correlation tends to 1.
    let sup = 1.0 / (1.0 + ratio);
    let p1 = bisect(0.0, sup, rho, corr);
    let p2 = ratio * p1;
    if p1 + p2 >= 1.0 || (corr(p1) - rho).abs() > 1e-10 {
        return Err(Error::NoSolution {
            rho,
            reason: format!("bisection ended at p1 = {p1} outside the feasible region"),
        });
    }
    Ok((p1, p2))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seeding::stream;

    fn grid_mass(spec: &DistributionSpec, max: u64) -> f64 {
        let mut total = 0.0;
        for x in 0..=max {
            for y in 0..=max {
                total += spec.pmf(x, y);
            }
        }
        total
    }

    #[test]
    fn poisson_pmf_at_origin() {
        let p = BivariatePoissonParams::new(0.5, 1.0, 0.0).unwrap();
        assert!((p.pmf(0, 0) - (-1.5f64).exp()).abs() < 1e-15);
        let p = BivariatePoissonParams::new(0.5, 1.0, 0.24).unwrap();
        assert!((p.pmf(0, 0) - (-1.74f64).exp()).abs() < 1e-15);
        assert!((p.pmf(0, 0) - 0.17552).abs() < 1e-5);
    }

    #[test]
    fn poisson_pmf_normalizes() {
        let spec = DistributionSpec::Poisson(BivariatePoissonParams::new(0.5, 1.0, 6.71).unwrap());
        assert!((grid_mass(&spec, 60) - 1.0).abs() < 1e-9);
    }

    #[test]
    fn poisson_pmf_large_counts_finite() {
        let p = BivariatePoissonParams::new(20.0, 30.0, 40.0).unwrap();
        let v = p.pmf(70, 80);
        assert!(v.is_finite() && v > 0.0 && v < 1.0);
    }

    #[test]
    fn negbin_pmf_closed_forms() {
        let p = BivariateNegBinParams::new(5, 0.1393, 0.2786).unwrap();
        let expected = (1.0f64 - 0.1393 - 0.2786).powi(5);
        assert!((p.pmf(0, 0) - expected).abs() < 1e-15);
        assert!((p.pmf(0, 0) - 0.06683).abs() < 1e-5);

        let geo = BivariateNegBinParams::new(1, 0.3, 0.0).unwrap();
        assert!((geo.pmf(0, 0) - 0.7).abs() < 1e-15);
        for k in 0..10u64 {
            assert!((geo.pmf(k, 0) - 0.7 * 0.3f64.powi(k as i32)).abs() < 1e-14);
            assert_eq!(geo.pmf(k, 1), 0.0);
        }
    }

    #[test]
    fn negbin_pmf_normalizes() {
        let spec = DistributionSpec::NegBin(BivariateNegBinParams::new(5, 0.2898, 0.5796).unwrap());
        // the y-marginal tail beyond 120 still holds about 2.7e-7 of the mass
        let truncated = grid_mass(&spec, 120);
        assert!(truncated < 1.0 && (truncated - 1.0).abs() < 3e-7);
        assert!((grid_mass(&spec, 200) - 1.0).abs() < 1e-8);
    }

    #[test]
    fn correlations_match_reference_parameters() {
        let c = |l3| BivariatePoissonParams::new(0.5, 1.0, l3).unwrap().correlation().unwrap();
        assert_eq!(c(0.0), 0.0);
        assert!((c(0.24) - 0.2505).abs() < 1e-4);
        assert!((c(6.71) - 0.900).abs() < 5e-4);

        let nb = |p1, p2| BivariateNegBinParams::new(5, p1, p2).unwrap().correlation();
        assert!((nb(0.1393, 0.2786) - 0.25).abs() < 5e-4);
        assert!((nb(0.2898, 0.5796) - 0.75).abs() < 5e-4);
        for p in [1e-3, 1e-6, 1e-9] {
            assert!((nb(p, p) - p / (1.0 - p)).abs() < 1e-15);
        }
    }

    #[test]
    fn degenerate_poisson_correlation() {
        let p = BivariatePoissonParams::new(0.0, 0.0, 0.0).unwrap();
        assert!(matches!(p.correlation(), Err(Error::DegenerateParams(_))));
        assert!(BivariatePoissonParams::new(-1.0, 0.0, 0.0).is_err());
        assert!(BivariateNegBinParams::new(5, 0.6, 0.4).is_err());
        assert!(BivariateNegBinParams::new(0, 0.1, 0.1).is_err());
    }

    #[test]
    fn poisson_solver_recovers_reference_covariances() {
        assert!((solve_poisson_lambda3(0.25, 0.5, 1.0).unwrap() - 0.24).abs() < 0.005);
        assert_eq!(solve_poisson_lambda3(0.0, 0.5, 1.0).unwrap(), 0.0);
        assert!((solve_poisson_lambda3(0.5, 0.5, 1.0).unwrap() - 0.73).abs() < 0.005);
        assert!((solve_poisson_lambda3(0.75, 0.5, 1.0).unwrap() - 2.22).abs() < 0.005);
        assert!((solve_poisson_lambda3(0.9, 0.5, 1.0).unwrap() - 6.71).abs() < 0.005);
        assert!(matches!(
            solve_poisson_lambda3(1.0, 0.5, 1.0),
            Err(Error::NoSolution { .. })
        ));
    }

    #[test]
    fn negbin_solver_recovers_reference_probabilities() {
        for (rho, p1, p2) in [(0.25, 0.1393, 0.2786), (0.5, 0.2287, 0.4574), (0.75, 0.2898, 0.5796)] {
            let (a, b) = solve_negbin_p(rho, 2.0).unwrap();
            assert!((a - p1).abs() < 1e-4, "{rho}: {a} vs {p1}");
            assert!((b - p2).abs() < 2e-4, "{rho}: {b} vs {p2}");
        }
        assert!(solve_negbin_p(1.0, 2.0).is_err());
        assert!(solve_negbin_p(0.0, 2.0).is_err());
    }

    #[test]
    fn solvers_round_trip_on_grid() {
        for i in 5..=95 {
            let rho = i as f64 / 100.0;
            let l3 = solve_poisson_lambda3(rho, 0.5, 1.0).unwrap();
            let got = BivariatePoissonParams::new(0.5, 1.0, l3).unwrap().correlation().unwrap();
            assert!((got - rho).abs() < 1e-10, "poisson {rho}: {got}");

            let (p1, p2) = solve_negbin_p(rho, 2.0).unwrap();
            assert!(p1 + p2 < 1.0);
            let got = BivariateNegBinParams::new(5, p1, p2).unwrap().correlation();
            assert!((got - rho).abs() < 1e-10, "negbin {rho}: {got}");
        }
    }

    #[test]
    fn zero_rates_sample_zeros() {
        let p = BivariatePoissonParams::new(0.0, 0.0, 0.0).unwrap();
        let s = p.sample(5, &mut stream(1, &[])).unwrap();
        assert!(s.pairs().all(|pair| pair == (0, 0)));

        let nb = BivariateNegBinParams::new(5, 1e-9, 1e-9).unwrap();
        let s = nb.sample(1000, &mut stream(2, &[])).unwrap();
        assert!(s.pairs().filter(|&p| p == (0, 0)).count() >= 999);
    }
}
