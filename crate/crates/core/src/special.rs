//! Scalar special functions: the Gaussian tail probability, its scaled form
//! `Q(x)·exp(x²/2)`, and the chi-square CDF.
//!
//! The public functions validate their arguments. The `pub(crate)` variants
//! skip validation and are used in the inner loops of the optimizer.

use std::f64::consts::FRAC_1_SQRT_2;

use crate::error::{Error, Result};

/// √(2π)
pub const SQRT_2PI: f64 = 2.506_628_274_631_000_5;

/// Above this argument the scaled Mills ratio switches from the direct
/// product to the continued fraction.
const MILLS_CF_BRANCH: f64 = 6.0;

const GAMMA_MAX_ITER: usize = 100_000;

/// A value in `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct Probability(f64);

impl Probability {
    pub fn new(value: f64) -> Result<Self> {
        if (0.0..=1.0).contains(&value) {
            Ok(Probability(value))
        } else {
            Err(Error::domain(format!("{value} is not a probability")))
        }
    }

    /// Clamps rounding excursions (e.g. `1 + 1e-17`) back into `[0, 1]`.
    pub(crate) fn clamped(value: f64) -> Self {
        Probability(value.clamp(0.0, 1.0))
    }

    #[inline]
    pub fn get(self) -> f64 {
        self.0
    }
}

impl From<Probability> for f64 {
    fn from(p: Probability) -> f64 {
        p.0
    }
}

fn check_finite(x: f64, what: &str) -> Result<()> {
    if x.is_finite() {
        Ok(())
    } else {
        Err(Error::domain(format!("{what}: argument must be finite, got {x}")))
    }
}

/// Gaussian tail probability `Q(x) = P(Z ≥ x)` for a standard normal `Z`.
pub fn q_function(x: f64) -> Result<Probability> {
    check_finite(x, "q_function")?;
    Ok(Probability::clamped(q(x)))
}

#[inline]
pub(crate) fn q(x: f64) -> f64 {
    0.5 * libm::erfc(x * FRAC_1_SQRT_2)
}

/// Standard normal density.
#[inline]
pub(crate) fn phi(x: f64) -> f64 {
    (-0.5 * x * x).exp() / SQRT_2PI
}

/// `Q(x)·exp(x²/2)`, evaluated without forming the overflowing/underflowing
/// factors separately for large positive `x`.
///
/// For `x < -37.6` the true value exceeds the `f64` range and `+∞` is
/// returned.
pub fn scaled_mills(x: f64) -> Result<f64> {
    check_finite(x, "scaled_mills")?;
    Ok(mills(x))
}

#[inline]
pub(crate) fn mills(x: f64) -> f64 {
    if x > MILLS_CF_BRANCH {
        mills_ratio_cf(x) / SQRT_2PI
    } else {
        q(x) * (0.5 * x * x).exp()
    }
}

/// Mills ratio `Q(x)/φ(x)` by the continued fraction
/// `1/(x + 1/(x + 2/(x + 3/(x + …))))`, modified Lentz. Only used for
/// `x > 6`, where it converges in a few dozen terms.
fn mills_ratio_cf(x: f64) -> f64 {
    const TINY: f64 = 1e-300;
    let mut value = x;
    let mut c = x;
    let mut d = 0.0;
    for j in 1..500 {
        let a = j as f64;
        d = x + a * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = x + a / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let delta = c * d;
        value *= delta;
        if (delta - 1.0).abs() < 1e-16 {
            break;
        }
    }
    1.0 / value
}

/// CDF of the chi-square distribution with `dof` degrees of freedom.
pub fn chi_square_cdf(dof: u64, x: f64) -> Result<Probability> {
    check_chi_square_args(dof, x)?;
    Ok(Probability::clamped(gamma_p(0.5 * dof as f64, 0.5 * x)))
}

/// Survival function `1 − F(x)` of the chi-square distribution, computed
/// directly so that small tail values keep their relative accuracy.
pub fn chi_square_sf(dof: u64, x: f64) -> Result<Probability> {
    check_chi_square_args(dof, x)?;
    Ok(Probability::clamped(gamma_q(0.5 * dof as f64, 0.5 * x)))
}

fn check_chi_square_args(dof: u64, x: f64) -> Result<()> {
    if dof == 0 {
        return Err(Error::domain("chi-square degrees of freedom must be >= 1"));
    }
    if !(x >= 0.0) || x.is_nan() {
        return Err(Error::domain(format!("chi-square argument must be >= 0, got {x}")));
    }
    Ok(())
}

/// Regularized lower incomplete gamma `P(a, x)`.
pub(crate) fn gamma_p(a: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x.is_infinite() {
        return 1.0;
    }
    if x < a + 1.0 {
        gamma_series(a, x)
    } else {
        1.0 - gamma_cf(a, x)
    }
}

/// Regularized upper incomplete gamma `Q(a, x) = 1 − P(a, x)`.
pub(crate) fn gamma_q(a: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 1.0;
    }
    if x.is_infinite() {
        return 0.0;
    }
    if x < a + 1.0 {
        1.0 - gamma_series(a, x)
    } else {
        gamma_cf(a, x)
    }
}

/// `ln(e^{-x} x^a / Γ(a))`
#[inline]
fn ln_gamma_prefactor(a: f64, x: f64) -> f64 {
    a * x.ln() - x - libm::lgamma(a)
}

fn gamma_series(a: f64, x: f64) -> f64 {
    let ln_pre = ln_gamma_prefactor(a, x);
    if ln_pre < -745.0 {
        return 0.0;
    }
    let mut ap = a;
    let mut term = 1.0 / a;
    let mut sum = term;
    for _ in 0..GAMMA_MAX_ITER {
        ap += 1.0;
        term *= x / ap;
        sum += term;
        if term.abs() < sum.abs() * 1e-17 {
            break;
        }
    }
    (sum * ln_pre.exp()).min(1.0)
}

/// Upper incomplete gamma continued fraction (modified Lentz).
fn gamma_cf(a: f64, x: f64) -> f64 {
    const TINY: f64 = 1e-300;
    let ln_pre = ln_gamma_prefactor(a, x);
    if ln_pre < -745.0 {
        return 0.0;
    }
    let mut b = x + 1.0 - a;
    let mut c = 1.0 / TINY;
    let mut d = 1.0 / b;
    let mut h = d;
    for i in 1..GAMMA_MAX_ITER {
        let an = -(i as f64) * (i as f64 - a);
        b += 2.0;
        d = an * d + b;
        if d.abs() < TINY {
            d = TINY;
        }
        c = b + an / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let delta = d * c;
        h *= delta;
        if (delta - 1.0).abs() < 1e-16 {
            break;
        }
    }
    (ln_pre.exp() * h).min(1.0)
}
