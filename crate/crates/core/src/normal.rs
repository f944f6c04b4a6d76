//! Gaussian tail numerics used by the censored update and likelihood.
//!
//! The upper tail `Q(z) = 1 - Phi(z)` underflows long before `z = 38`, so the
//! inverse Mills ratio and log-survival are evaluated through the scaled
//! complementary error function `erfcx(x) = exp(x^2) erfc(x)`.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use libm::erfc;
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{domain, Result};

const FRAC_1_SQRT_PI: f64 = 0.564_189_583_547_756_3;
const SQRT_2_OVER_PI: f64 = 0.797_884_560_802_865_4;
const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

/// Above this argument `erfc(x) exp(x^2)` loses digits; switch to the
/// continued fraction.
const ERFCX_CF_THRESHOLD: f64 = 5.0;
const ERFCX_CF_TERMS: usize = 90;

/// Scaled complementary error function for `x >= 0`.
pub(crate) fn erfcx_nonneg(x: f64) -> f64 {
    debug_assert!(x >= 0.0);
    if x < ERFCX_CF_THRESHOLD {
        return erfc(x) * (x * x).exp();
    }
    // erfcx(x) = 1/sqrt(pi) * 1/(x + (1/2)/(x + 1/(x + (3/2)/(x + ...))))
    let mut tail = x;
    for k in (1..=ERFCX_CF_TERMS).rev() {
        tail = x + (k as f64 * 0.5) / tail;
    }
    FRAC_1_SQRT_PI / tail
}

/// Standard normal density.
pub fn std_normal_pdf(z: f64) -> f64 {
    (-0.5 * z * z - LN_SQRT_2PI).exp()
}

/// `ln Q(z) = ln(1 - Phi(z))`, finite for every finite `z`.
pub fn log_survival(z: f64) -> f64 {
    if z == f64::NEG_INFINITY {
        return 0.0;
    }
    if z < 0.0 {
        // Phi(z) = erfc(-z / sqrt 2) / 2 is small here
        (-0.5 * erfc(-z * FRAC_1_SQRT_2)).ln_1p()
    } else {
        (0.5 * erfcx_nonneg(z * FRAC_1_SQRT_2)).ln() - 0.5 * z * z
    }
}

/// Inverse Mills ratio `phi(z) / (1 - Phi(z))`.
pub fn inverse_mills(z: f64) -> f64 {
    if z == f64::NEG_INFINITY {
        return 0.0;
    }
    if z < 0.0 {
        std_normal_pdf(z) / (1.0 - 0.5 * erfc(-z * FRAC_1_SQRT_2))
    } else {
        SQRT_2_OVER_PI / erfcx_nonneg(z * FRAC_1_SQRT_2)
    }
}

/// `E[Z | Z > lower]` for `Z ~ N(mu, sigma^2)`.
pub fn truncated_normal_mean_above(mu: f64, sigma: f64, lower: f64) -> Result<f64> {
    if !(sigma > 0.0 && sigma.is_finite()) || !mu.is_finite() {
        return Err(domain(format!(
            "truncated normal needs finite mu and sigma > 0, got mu={mu}, sigma={sigma}"
        )));
    }
    if lower.is_nan() || lower == f64::INFINITY {
        return Err(domain(format!("truncation point must be < +inf, got {lower}")));
    }
    if lower == f64::NEG_INFINITY {
        return Ok(mu);
    }
    Ok(mu + sigma * inverse_mills((lower - mu) / sigma))
}

/// Log density of `N(0, sigma2)` at `e`.
#[inline]
pub fn log_normal_density(e: f64, sigma2: f64) -> f64 {
    -0.5 * (2.0 * PI * sigma2).ln() - 0.5 * e * e / sigma2
}

/// Standard normal quantile `Phi^{-1}(p)` for `p` in (0, 1).
pub fn std_normal_quantile(p: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(domain(format!("probability must lie in (0, 1), got {p}")));
    }
    Ok(Normal::standard().inverse_cdf(p))
}
