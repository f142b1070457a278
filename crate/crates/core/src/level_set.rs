//! The strictly convex curve `f(x) = x + 2√(2π) Q(x) e^{x²/2}` and the
//! machinery built on it.
//!
//! At any interior stationary point of the expected usage, the normalized
//! offsets `Ĝ = √n (T − x_G)` and `B̂ = √n (T − x_B)` lie on a common level
//! set of `f`: `f(Ĝ) = f(B̂) = y`. Parametrizing the pair by the level `y`
//! (left branch for `Ĝ`, right branch for `B̂`) turns the two stationarity
//! equations into one scalar equation `h(y) = C` with `h` strictly
//! increasing.

use std::sync::OnceLock;

use crate::channel::ChannelSpec;
use crate::error::{Error, Result};
use crate::roots::{newton_bisect, Tolerance};
use crate::special::{mills, SQRT_2PI};

const TWO_SQRT_2PI: f64 = 2.0 * SQRT_2PI;

/// Lower end of the left-branch bracket. `f(-40)` overflows to `+∞`, which
/// is fine for bracketing since only its sign relative to `y` is used.
const LEFT_BRACKET: f64 = -40.0;

/// `ln(f64::MAX)`
const LN_MAX: f64 = 709.782_712_893_384;

pub fn f(x: f64) -> f64 {
    x + TWO_SQRT_2PI * mills(x)
}

/// `f'(x) = 2√(2π) x Q(x) e^{x²/2} − 1`
pub fn f_prime(x: f64) -> f64 {
    TWO_SQRT_2PI * x * mills(x) - 1.0
}

/// `f''(x) = 2√(2π) Q(x) e^{x²/2} (x² + 1) − 2x`
pub fn f_double_prime(x: f64) -> f64 {
    TWO_SQRT_2PI * mills(x) * (x * x + 1.0) - 2.0 * x
}

/// Location and value of the minimum of `f`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FMinimum {
    pub x_star: f64,
    pub y_min: f64,
}

/// The minimum of `f`, computed on first use and cached.
pub fn f_minimum() -> FMinimum {
    static CACHE: OnceLock<FMinimum> = OnceLock::new();
    *CACHE.get_or_init(|| {
        let root = newton_bisect(|x| (f_prime(x), f_double_prime(x)), 0.0, 1.0, Some(0.6), Tolerance::residual(1e-15))
            .expect("f' changes sign on [0, 1]");
        FMinimum { x_star: root.x, y_min: f(root.x) }
    })
}

fn check_level(y: f64) -> Result<FMinimum> {
    let m = f_minimum();
    if !(y > m.y_min) || !y.is_finite() {
        return Err(Error::domain(format!("level {y} is not above the minimum {} of f", m.y_min)));
    }
    Ok(m)
}

fn inverse_on(y: f64, lo: f64, hi: f64, guess: Option<f64>) -> Result<f64> {
    let tol = Tolerance::residual(1e-15 * y.abs().max(1.0));
    let root = newton_bisect(|x| (f(x) - y, f_prime(x)), lo, hi, guess, tol)?;
    Ok(root.x)
}

/// Solution of `f(x) = y` with `x < x_star`.
pub fn inv_left(y: f64) -> Result<f64> {
    let m = check_level(y)?;
    // For x << 0, f(x) ~ 2√(2π) e^{x²/2}.
    let guess = (y > 2.0 * TWO_SQRT_2PI).then(|| -(2.0 * (y / TWO_SQRT_2PI).ln()).sqrt());
    inverse_on(y, LEFT_BRACKET, m.x_star, guess)
}

/// Solution of `f(x) = y` with `x > x_star`. Since `f(x) > x`, `y` itself
/// bounds the root from above.
pub fn inv_right(y: f64) -> Result<f64> {
    let m = check_level(y)?;
    let hi = y.max(m.x_star + 1.0);
    let guess = (y > 4.0).then(|| y - 2.0 / y);
    inverse_on(y, m.x_star, hi, guess)
}

/// Both branches at level `y`: `(g, b)` with `g < x_star < b`.
pub fn level_pair(y: f64) -> Result<(f64, f64)> {
    Ok((inv_left(y)?, inv_right(y)?))
}

/// `ln(p_G e^{b²/2} + p_B e^{g²/2})`
fn ln_weight(ch: &ChannelSpec, g: f64, b: f64) -> f64 {
    let lg = ch.p_bad().ln() + 0.5 * g * g;
    let lb = ch.p_good().ln() + 0.5 * b * b;
    let hi = lg.max(lb);
    hi + ((lg - hi).exp() + (lb - hi).exp()).ln()
}

/// `h` evaluated at a known level pair; `+∞` once the value leaves the `f64`
/// range.
pub(crate) fn h_from_pair(ch: &ChannelSpec, g: f64, b: f64) -> f64 {
    let spread = b - g;
    if spread <= 0.0 {
        return 0.0;
    }
    let ln_h = spread.ln() + ln_weight(ch, g, b);
    if ln_h > LN_MAX {
        f64::INFINITY
    } else {
        ln_h.exp()
    }
}

/// `h(y) = [f_B⁻¹(y) − f_G⁻¹(y)] · [p_G e^{f_B⁻¹(y)²/2} + p_B e^{f_G⁻¹(y)²/2}]`
pub fn h(ch: &ChannelSpec, y: f64) -> Result<f64> {
    let (g, b) = level_pair(y)?;
    Ok(h_from_pair(ch, g, b))
}

pub(crate) fn h_prime_from_pair(ch: &ChannelSpec, g: f64, b: f64) -> f64 {
    let db = 1.0 / f_prime(b);
    let dg = 1.0 / f_prime(g);
    let eb = ch.p_good() * (0.5 * b * b).exp();
    let eg = ch.p_bad() * (0.5 * g * g).exp();
    (db - dg) * (eb + eg) + (b - g) * (eb * b * db + eg * g * dg)
}

/// `dh/dy`, using `d f⁻¹/dy = 1 / f'(f⁻¹(y))` on each branch.
pub fn h_prime(ch: &ChannelSpec, y: f64) -> Result<f64> {
    let (g, b) = level_pair(y)?;
    Ok(h_prime_from_pair(ch, g, b))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn channel(p: f64) -> ChannelSpec {
        ChannelSpec::new(p, 1.2, 0.7).unwrap()
    }

    #[test]
    fn f_reference_values() {
        assert!((f(0.0) - SQRT_2PI).abs() < 1e-15);
        assert!((f(0.6120) - 2.2460).abs() < 5e-4);
        assert!((f(10.0) / 10.2 - 1.0).abs() < 0.02);
        assert!(f(-30.0).is_finite());
        assert!(f(40.0).is_finite());
    }

    #[test]
    fn second_derivative_at_zero() {
        assert!((f_double_prime(0.0) - SQRT_2PI).abs() < 1e-15);
    }

    #[test]
    fn derivatives_match_finite_differences() {
        for i in -40..=60 {
            let x = i as f64 * 0.1;
            let h = 1e-5;
            let fd1 = (f(x + h) - f(x - h)) / (2.0 * h);
            let fd2 = (f_prime(x + h) - f_prime(x - h)) / (2.0 * h);
            assert!((fd1 - f_prime(x)).abs() < 1e-7 * (1.0 + f_prime(x).abs()), "x={x}");
            assert!((fd2 - f_double_prime(x)).abs() < 1e-7 * (1.0 + f_double_prime(x).abs()), "x={x}");
        }
    }

    #[test]
    fn minimum_matches_reference() {
        let m = f_minimum();
        assert!((m.x_star - 0.6120).abs() < 5e-5);
        assert!((m.y_min - 2.2460).abs() < 5e-4);
        assert!(f_prime(m.x_star).abs() <= 1e-13);
        assert!(m.x_star > 0.61 && m.x_star < 0.62);
        let d = 1e-3;
        assert!(f(m.x_star - d) > m.y_min && f(m.x_star + d) > m.y_min);
    }

    #[test]
    fn inverse_examples() {
        assert!(inv_left(SQRT_2PI).unwrap().abs() < 1e-12);
        assert!((inv_right(f(1.0)).unwrap() - 1.0).abs() < 1e-10);
        assert!((inv_right(2.5066).unwrap() - 1.4536).abs() < 1e-4);
    }

    #[test]
    fn inverses_reject_levels_at_or_below_minimum() {
        let m = f_minimum();
        assert!(inv_left(m.y_min).is_err());
        assert!(inv_right(m.y_min - 0.1).is_err());
        assert!(h(&channel(0.5), 1.0).is_err());
        assert!(h_prime(&channel(0.5), m.y_min).is_err());
    }

    #[test]
    fn inverses_for_extreme_levels() {
        for &y in &[3.0, 30.0, 1e3, 1e6, 1e100] {
            let g = inv_left(y).unwrap();
            let b = inv_right(y).unwrap();
            assert!(((f(g) - y) / y).abs() < 1e-11, "y={y}");
            assert!(((f(b) - y) / y).abs() < 1e-11, "y={y}");
        }
    }

    #[test]
    fn h_vanishes_at_the_bottom_and_grows() {
        let m = f_minimum();
        let ch = channel(0.3);
        assert!(h(&ch, m.y_min + 1e-8).unwrap() < 1e-3);
        assert!(h(&ch, 3.0).unwrap() < h(&ch, 3.5).unwrap());
        assert!(h(&ch, 1e6).unwrap().is_infinite());
    }

    #[test]
    fn h_prime_matches_finite_differences() {
        let m = f_minimum();
        for &p in &[0.1, 0.5, 0.9] {
            let ch = channel(p);
            let mut y = m.y_min + 0.01;
            while y <= 10.0 {
                let step = 1e-6 * y;
                let fd = (h(&ch, y + step).unwrap() - h(&ch, y - step).unwrap()) / (2.0 * step);
                let an = h_prime(&ch, y).unwrap();
                assert!(((fd - an) / an).abs() < 1e-6, "p={p} y={y} fd={fd} an={an}");
                y += 0.173;
            }
        }
    }

    #[test]
    fn margin_below_f_of_zero() {
        // For 0 < g < x_star the partner satisfies 1 − g b > 0.1104.
        let m = f_minimum();
        let top = f(0.0);
        let steps = 2000;
        for i in 1..steps {
            let y = m.y_min + (top - m.y_min) * i as f64 / steps as f64;
            let (g, b) = level_pair(y).unwrap();
            assert!(g > 0.0 && g < m.x_star && b > m.x_star);
            assert!(1.0 - g * b > 0.1104, "y={y} g={g} b={b}");
        }
    }
}
