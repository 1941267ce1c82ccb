//! Standard normal CDF and quantile.
//!
//! The quantile starts from the `erfc` inverse and takes one Newton step,
//! which keeps `|Φ(Φ⁻¹(p)) − p|` at rounding level across `(0, 1)`.

use libm::erfc;
use statrs::function::erf::erfc_inv;
use std::f64::consts::{PI, SQRT_2};

/// Φ(x).
pub fn cdf(x: f64) -> f64 {
    0.5 * erfc(-x / SQRT_2)
}

/// Φ⁻¹(p) for p in (0, 1). Returns ±∞ at the endpoints.
pub fn quantile(p: f64) -> f64 {
    if p <= 0.0 {
        return f64::NEG_INFINITY;
    }
    if p >= 1.0 {
        return f64::INFINITY;
    }
    let x = -SQRT_2 * erfc_inv(2.0 * p);
    // one Newton step against the CDF
    let density = (-0.5 * x * x).exp() / (2.0 * PI).sqrt();
    if density > 0.0 {
        x - (cdf(x) - p) / density
    } else {
        x
    }
}
