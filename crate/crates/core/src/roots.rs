//! Bracketed Newton iteration with bisection fallback.
//!
//! Every root finder in the crate goes through [`newton_bisect`]. A Newton
//! step is taken when it stays strictly inside the current sign-change
//! bracket and shrinks the step fast enough; otherwise the bracket is
//! bisected. Convergence is therefore guaranteed for any continuous function
//! with a sign change on the initial bracket.

use crate::error::{Error, Result};

/// Iteration cap shared by the crate's root finders.
pub const MAX_ITER: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Root {
    pub x: f64,
    /// Function value at `x`.
    pub residual: f64,
    pub iterations: usize,
}

/// Stopping rule: `|f(x)| <= residual`, or the bracket / Newton step has
/// shrunk to a few ulps of `x`, whichever comes first.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerance {
    pub residual: f64,
    pub max_iter: usize,
}

impl Tolerance {
    pub fn residual(residual: f64) -> Self {
        Tolerance { residual, max_iter: MAX_ITER }
    }
}

/// Finds a root of `f` in `[lo, hi]`.
///
/// `f` returns the pair `(value, derivative)`. Values may be `±∞` (only the
/// sign is used for bracketing); a NaN value is an error. `guess` seeds the
/// first Newton step and defaults to the bracket midpoint.
pub fn newton_bisect<F>(mut f: F, lo: f64, hi: f64, guess: Option<f64>, tol: Tolerance) -> Result<Root>
where
    F: FnMut(f64) -> (f64, f64),
{
    if !(lo < hi) {
        return Err(Error::domain(format!("invalid bracket [{lo}, {hi}]")));
    }
    let (f_lo, _) = f(lo);
    let (f_hi, _) = f(hi);
    if f_lo.is_nan() || f_hi.is_nan() {
        return Err(Error::numerical("function is NaN at a bracket endpoint"));
    }
    if f_lo == 0.0 {
        return Ok(Root { x: lo, residual: 0.0, iterations: 0 });
    }
    if f_hi == 0.0 {
        return Ok(Root { x: hi, residual: 0.0, iterations: 0 });
    }
    if f_lo.signum() == f_hi.signum() {
        return Err(Error::numerical(format!("no sign change on [{lo}, {hi}]: f(lo)={f_lo}, f(hi)={f_hi}")));
    }

    // `neg` always holds the endpoint with f < 0.
    let (mut neg, mut pos) = if f_lo < 0.0 { (lo, hi) } else { (hi, lo) };
    let mut x = match guess {
        Some(g) if g > lo && g < hi => g,
        _ => 0.5 * (lo + hi),
    };
    let mut step_old = hi - lo;
    let mut step = step_old;

    for iter in 1..=tol.max_iter {
        let (fx, dfx) = f(x);
        if fx.is_nan() {
            return Err(Error::numerical(format!("function is NaN at x={x}")));
        }
        if fx.abs() <= tol.residual {
            return Ok(Root { x, residual: fx, iterations: iter });
        }
        if fx < 0.0 {
            neg = x;
        } else {
            pos = x;
        }
        let (a, b) = if neg < pos { (neg, pos) } else { (pos, neg) };
        let ulp_scale = 4.0 * f64::EPSILON * x.abs().max(f64::MIN_POSITIVE);
        if b - a <= ulp_scale {
            return Ok(Root { x, residual: fx, iterations: iter });
        }

        let newton = x - fx / dfx;
        let newton_ok = fx.is_finite()
            && dfx.is_finite()
            && dfx != 0.0
            && newton > a
            && newton < b
            && (newton - x).abs() < 0.5 * step_old.abs();
        step_old = step;
        if newton_ok {
            step = newton - x;
            if step.abs() <= ulp_scale {
                return Ok(Root { x: newton, residual: fx, iterations: iter });
            }
            x = newton;
        } else {
            let mid = 0.5 * (a + b);
            step = mid - x;
            x = mid;
        }
    }
    Err(Error::numerical(format!("root finder did not converge in {} iterations (last x={x})", tol.max_iter)))
}
