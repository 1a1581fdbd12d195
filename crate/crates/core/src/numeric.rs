//! Small numerical helpers shared by the fitting and search code.

use statrs::distribution::{ContinuousCDF, Normal};
use statrs::function::erf::erfc;
use std::f64::consts::{PI, SQRT_2};

/// `ln(sum(exp(x)))` over a slice, stable for large negative inputs.
pub fn log_sum_exp(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    if max == f64::INFINITY {
        return f64::INFINITY;
    }
    let sum: f64 = values.iter().map(|v| (v - max).exp()).sum();
    max + sum.ln()
}

/// Safe `ln` that maps 0 to negative infinity.
#[inline]
pub fn ln0(p: f64) -> f64 {
    if p <= 0.0 {
        f64::NEG_INFINITY
    } else {
        p.ln()
    }
}

/// Log density of `N(mean, variance)` at `x`.
#[inline]
pub fn gaussian_log_density(x: f64, mean: f64, variance: f64) -> f64 {
    let d = x - mean;
    -0.5 * ((2.0 * PI * variance).ln() + d * d / variance)
}

/// Upper tail `P(Z > z)` of the standard normal.
#[inline]
fn upper_tail(z: f64) -> f64 {
    0.5 * erfc(z / SQRT_2)
}

/// Standard normal CDF.
#[inline]
pub fn std_normal_cdf(z: f64) -> f64 {
    0.5 * erfc(-z / SQRT_2)
}

/// Probability mass of `(lower, upper]` under `N(mean, variance)`.
///
/// Evaluated through whichever tail keeps the subtraction well conditioned,
/// so intervals far from the mean keep their relative accuracy.
pub fn gaussian_interval_mass(mean: f64, variance: f64, lower: f64, upper: f64) -> f64 {
    if upper <= lower {
        return 0.0;
    }
    let sd = variance.sqrt();
    let za = (lower - mean) / sd;
    let zb = (upper - mean) / sd;
    let mass = if za >= 0.0 {
        upper_tail(za) - upper_tail(zb)
    } else if zb <= 0.0 {
        std_normal_cdf(zb) - std_normal_cdf(za)
    } else {
        1.0 - upper_tail(zb) - std_normal_cdf(za)
    };
    mass.clamp(0.0, 1.0)
}

/// Standard normal quantile.
pub fn std_normal_quantile(p: f64) -> f64 {
    Normal::standard().inverse_cdf(p)
}

/// Half-width, in standard deviations, of the central interval holding mass `q`.
pub fn central_half_width(q: f64) -> f64 {
    std_normal_quantile(0.5 + 0.5 * q)
}
