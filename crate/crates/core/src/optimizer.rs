//! Optimal pilot length and threshold.
//!
//! The real-valued optimum `(n̂, T̂)` is the unique stationary point of `τ̄`.
//! It is found through the level-set parametrization of [`crate::level_set`]:
//! one monotone scalar root `h(y) = C`, after which
//!
//! ```text
//! n̂ = ((Ĝ − B̂) / (x_G − x_B))²,   T̂ = (Ĝ x_B − B̂ x_G) / (Ĝ − B̂)
//! ```
//!
//! The integer policy compares `⌊n̂⌋` and `⌈n̂⌉`, each with its own best
//! threshold for that fixed pilot length.

use log::{debug, warn};
use rayon::prelude::*;

use crate::channel::{
    expected_usage, gradient, hessian, potential_reduction, reference_usage, threshold_slope_scaled, ChannelSpec,
    PilotPolicy, Threshold, TransmissionCost,
};
use crate::error::{Error, Result};
use crate::level_set::{f_double_prime, f_minimum, h_from_pair, h_prime_from_pair, level_pair};
use crate::roots::{newton_bisect, Tolerance};
use crate::special::SQRT_2PI;

/// Offset above `y_min` where the bracket for `h(y) = C` starts.
const Y_BRACKET_OFFSET: f64 = 1e-9;
/// Give up expanding the bracket beyond this level.
const Y_BRACKET_LIMIT: f64 = 1e6;
/// Relative agreement required between the level-set solution and the 2-D
/// Newton refinement.
const REFINE_AGREEMENT: f64 = 1e-8;
/// Candidates whose usage differs by less than this (relative) are tied.
const TIE_TOLERANCE: f64 = 1e-12;

/// Interior stationary point of `τ̄` with its level-set coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StationaryPoint {
    pub n_hat: f64,
    pub t_hat: f64,
    /// `√n̂ (T̂ − x_G)`
    pub g_hat: f64,
    /// `√n̂ (T̂ − x_B)`
    pub b_hat: f64,
    /// Common level `f(Ĝ) = f(B̂)`.
    pub y: f64,
    pub tau_bar: f64,
    /// True when `y` sits too close to `y_min` to be resolved in double
    /// precision and the pair was taken from the quadratic expansion of `f`
    /// at its minimum instead.
    pub near_static: bool,
}

/// Right-hand side of `h(y) = C`: `p_G p_B τ_diff (x_G − x_B)² / (2√(2π))`.
pub fn level_equation_rhs(ch: &ChannelSpec, cost: &TransmissionCost) -> f64 {
    let dx = ch.x_good() - ch.x_bad();
    ch.p_good() * ch.p_bad() * cost.tau_diff() * dx * dx / (2.0 * SQRT_2PI)
}

/// Real-valued global minimizer of `τ̄` over `n > 0` and finite `T`.
pub fn solve_real_optimum(ch: &ChannelSpec, cost: &TransmissionCost) -> Result<StationaryPoint> {
    let rhs = level_equation_rhs(ch, cost);
    let m = f_minimum();
    let h_at = |y: f64| -> Result<f64> {
        let (g, b) = level_pair(y)?;
        Ok(h_from_pair(ch, g, b))
    };

    let lo = m.y_min + Y_BRACKET_OFFSET;
    if h_at(lo)? >= rhs {
        return Ok(near_static_point(ch, cost, rhs));
    }
    let mut width = 1.0;
    while h_at(m.y_min + width)? <= rhs {
        width *= 2.0;
        if m.y_min + width > Y_BRACKET_LIMIT {
            return Err(Error::numerical(format!("could not bracket h(y) = {rhs} below y = {Y_BRACKET_LIMIT}")));
        }
    }
    let hi = m.y_min + width;

    let tol = Tolerance::residual(1e-12 * rhs.max(1.0));
    let root = newton_bisect(
        |y| match level_pair(y) {
            Ok((g, b)) => (h_from_pair(ch, g, b) - rhs, h_prime_from_pair(ch, g, b)),
            Err(_) => (f64::NAN, f64::NAN),
        },
        lo,
        hi,
        None,
        tol,
    )?;
    let y = root.x;
    let (g, b) = level_pair(y)?;
    let point = point_from_pair(ch, cost, g, b, y, false);
    cross_check(ch, cost, &point)?;
    Ok(point)
}

fn point_from_pair(
    ch: &ChannelSpec,
    cost: &TransmissionCost,
    g: f64,
    b: f64,
    y: f64,
    near_static: bool,
) -> StationaryPoint {
    let dx = ch.x_good() - ch.x_bad();
    let n_hat = ((b - g) / dx).powi(2);
    let t_hat = (g * ch.x_bad() - b * ch.x_good()) / (g - b);
    let sn = n_hat.sqrt();
    let tau_bar = expected_usage(ch, cost, &PilotPolicy { n: n_hat, threshold: Threshold::Finite(t_hat) });
    StationaryPoint {
        n_hat,
        t_hat,
        g_hat: sn * (t_hat - ch.x_good()),
        b_hat: sn * (t_hat - ch.x_bad()),
        y,
        tau_bar,
        near_static,
    }
}

/// Tiny right-hand sides put the level within rounding distance of `y_min`.
/// There `f(x) ≈ y_min + f''(x*) (x − x*)² / 2`, so the pair is symmetric
/// about `x*` to leading order with spread `δ` solving
/// `δ (p_G e^{b²/2} + p_B e^{g²/2}) = C`.
fn near_static_point(ch: &ChannelSpec, cost: &TransmissionCost, rhs: f64) -> StationaryPoint {
    let m = f_minimum();
    let mut spread = rhs * (-0.5 * m.x_star * m.x_star).exp();
    for _ in 0..20 {
        let (g, b) = (m.x_star - 0.5 * spread, m.x_star + 0.5 * spread);
        let weight = ch.p_good() * (0.5 * b * b).exp() + ch.p_bad() * (0.5 * g * g).exp();
        let next = rhs / weight;
        let done = (next - spread).abs() <= 1e-15 * spread;
        spread = next;
        if done {
            break;
        }
    }
    let y = m.y_min + f_double_prime(m.x_star) * spread * spread / 8.0;
    debug!("near-static channel: level-set spread {spread:e} resolved by expansion");
    point_from_pair(ch, cost, m.x_star - 0.5 * spread, m.x_star + 0.5 * spread, y, true)
}

/// Runs a few 2-D Newton steps on `∇τ̄ = 0` from the level-set solution and
/// checks the two routes agree.
fn cross_check(ch: &ChannelSpec, cost: &TransmissionCost, sp: &StationaryPoint) -> Result<()> {
    let Some((n, t)) = newton_refine(ch, cost, sp.n_hat, sp.t_hat, 8) else {
        return Err(Error::numerical(format!("Newton refinement left the domain from n={}, T={}", sp.n_hat, sp.t_hat)));
    };
    let dn = (n - sp.n_hat).abs() / (1.0 + sp.n_hat);
    let dt = (t - sp.t_hat).abs() / (1.0 + sp.t_hat.abs());
    if dn > REFINE_AGREEMENT || dt > REFINE_AGREEMENT {
        return Err(Error::numerical(format!(
            "level-set optimum (n={}, T={}) and Newton refinement (n={n}, T={t}) disagree",
            sp.n_hat, sp.t_hat
        )));
    }
    Ok(())
}

/// Undamped Newton iteration on `∇τ̄ = 0` from `(n0, t0)`.
///
/// Returns `None` if an iterate leaves `n > 0`, runs off to `|T| → ∞`, the
/// Hessian is singular, or the gradient does not settle within `max_iter`
/// steps.
pub fn newton_refine(
    ch: &ChannelSpec,
    cost: &TransmissionCost,
    n0: f64,
    t0: f64,
    max_iter: usize,
) -> Option<(f64, f64)> {
    let gap = ch.x_good() - ch.x_bad();
    let (mut n, mut t) = (n0, t0);
    for _ in 0..max_iter {
        let g = gradient(ch, cost, n, t).ok()?;
        let scale = 1.0 + expected_usage(ch, cost, &PilotPolicy { n, threshold: Threshold::Finite(t) });
        if g.max_abs() <= 1e-13 * scale {
            return Some((n, t));
        }
        let hs = hessian(ch, cost, n, t).ok()?;
        let det = hs.det();
        if det == 0.0 || !det.is_finite() {
            return None;
        }
        // Solve [tt tn; nt nn] [dT dn] = -[g_T g_n].
        let d_t = -(hs.nn * g.d_t - hs.tn * g.d_n) / det;
        let d_n = -(hs.tt * g.d_n - hs.nt * g.d_t) / det;
        let small = d_t.abs() <= 1e-15 * (1.0 + t.abs()) && d_n.abs() <= 1e-15 * (1.0 + n);
        t += d_t;
        n += d_n;
        if !(n > 0.0 && n.is_finite() && t.is_finite()) {
            return None;
        }
        // Once |T| dwarfs x_G − x_B the two normalized offsets agree to
        // rounding and the derivatives carry no information.
        if f64::EPSILON * t.abs() > 1e-8 * gap {
            return None;
        }
        if small {
            break;
        }
    }
    let g = gradient(ch, cost, n, t).ok()?;
    let scale = 1.0 + expected_usage(ch, cost, &PilotPolicy { n, threshold: Threshold::Finite(t) });
    (g.max_abs() <= 1e-9 * scale).then_some((n, t))
}

/// Best threshold for a fixed integer pilot length.
///
/// - `n = 0`: the threshold is irrelevant; `0` is returned.
/// - `n ≥ p_B τ_diff`: `−∞` (always transmit). Such a pilot length cannot
///   beat the untrained reference anyway.
/// - otherwise the unique finite root of `∂τ̄/∂T = 0` when it exists, and
///   `−∞` when `∂τ̄/∂T > 0` everywhere (possible only for
///   `n ≥ p_G τ_diff`).
pub fn optimal_threshold_for_n(ch: &ChannelSpec, cost: &TransmissionCost, n: u64) -> Result<Threshold> {
    if n == 0 {
        return Ok(Threshold::Finite(0.0));
    }
    let nf = n as f64;
    if nf >= potential_reduction(ch, cost) {
        return Ok(Threshold::NegInfinity);
    }
    // Limit of the scaled slope as T → −∞.
    if nf >= ch.p_good() * cost.tau_diff() {
        return Ok(Threshold::NegInfinity);
    }

    let slope = |t: f64| threshold_slope_scaled(ch, cost, nf, t);
    let mut lo = ch.x_bad() - 1.0;
    let mut step = 1.0;
    while slope(lo).0 >= 0.0 {
        step *= 2.0;
        lo -= step;
        if step > 1e6 {
            return Err(Error::numerical(format!("cannot bracket the threshold for n={n} from below")));
        }
    }
    let mut hi = ch.x_good() + 1.0;
    let mut step = 1.0;
    while slope(hi).0 <= 0.0 {
        step *= 2.0;
        hi += step;
        if step > 1e6 {
            return Err(Error::numerical(format!("cannot bracket the threshold for n={n} from above")));
        }
    }
    let scale = nf + potential_reduction(ch, cost);
    let guess = 0.5 * (ch.x_good() + ch.x_bad());
    let root = newton_bisect(slope, lo, hi, Some(guess), Tolerance::residual(1e-14 * scale))?;
    Ok(Threshold::Finite(root.x))
}

/// One integer candidate examined by [`optimize`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Candidate {
    pub n: u64,
    pub threshold: Threshold,
    pub tau_bar: f64,
}

impl Candidate {
    fn evaluate(ch: &ChannelSpec, cost: &TransmissionCost, n: u64) -> Result<Self> {
        let threshold = optimal_threshold_for_n(ch, cost, n)?;
        let tau_bar = expected_usage(ch, cost, &PilotPolicy { n: n as f64, threshold });
        Ok(Candidate { n, threshold, tau_bar })
    }
}

/// Optimal integer policy.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptimalPolicy {
    pub n_star: u64,
    pub t_star: Threshold,
    pub tau_bar_star: f64,
    /// `τ̄_ref − τ̄⋆`
    pub reduction: f64,
    pub tau_ref: f64,
    pub stationary: StationaryPoint,
    /// The `⌊n̂⌋` and `⌈n̂⌉` candidates (identical when `n̂` is an integer).
    pub candidates: [Candidate; 2],
}

impl OptimalPolicy {
    pub fn policy(&self) -> PilotPolicy {
        PilotPolicy { n: self.n_star as f64, threshold: self.t_star }
    }

    /// Reduction as a fraction of `τ̄_ref`.
    pub fn reduction_fraction(&self) -> f64 {
        self.reduction / self.tau_ref
    }
}

/// The optimal integer pair `(n⋆, T⋆)`.
pub fn optimize(ch: &ChannelSpec, cost: &TransmissionCost) -> Result<OptimalPolicy> {
    let stationary = solve_real_optimum(ch, cost)?;
    let tau_ref = reference_usage(ch, cost);

    let lower = Candidate::evaluate(ch, cost, stationary.n_hat.floor() as u64)?;
    let upper = Candidate::evaluate(ch, cost, stationary.n_hat.ceil() as u64)?;
    let tie = TIE_TOLERANCE * lower.tau_bar.abs().max(1.0);
    let mut best = if lower.tau_bar - upper.tau_bar > tie { upper } else { lower };

    if best.tau_bar > tau_ref {
        warn!("neighbouring candidates of n̂={} exceed the untrained usage; falling back to n=0", stationary.n_hat);
        best = Candidate::evaluate(ch, cost, 0)?;
    }

    Ok(OptimalPolicy {
        n_star: best.n,
        t_star: best.threshold,
        tau_bar_star: best.tau_bar,
        reduction: tau_ref - best.tau_bar,
        tau_ref,
        stationary,
        candidates: [lower, upper],
    })
}

/// Exhaustive minimizer over a grid, returned by [`grid_search_oracle`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridOptimum {
    pub n: u64,
    pub threshold: Threshold,
    pub tau_bar: f64,
}

/// Brute-force minimum of `τ̄` over `n ∈ {0, …, n_max}` and `T` on an even
/// grid of `t_steps` points in `[t_lo, t_hi]` plus `−∞`.
///
/// Rows are evaluated in parallel; ties go to the smallest `n`, then the
/// smallest `T`, so the answer does not depend on scheduling.
pub fn grid_search_oracle(
    ch: &ChannelSpec,
    cost: &TransmissionCost,
    n_max: u64,
    t_lo: f64,
    t_hi: f64,
    t_steps: usize,
) -> Result<GridOptimum> {
    if n_max < 1 || t_steps < 2 || !(t_lo < t_hi) {
        return Err(Error::domain(format!(
            "grid requires n_max >= 1, t_steps >= 2, t_lo < t_hi; got {n_max}, {t_steps}, [{t_lo}, {t_hi}]"
        )));
    }
    let dt = (t_hi - t_lo) / (t_steps - 1) as f64;
    let rows: Vec<GridOptimum> = (0..=n_max)
        .into_par_iter()
        .map(|n| {
            let mut best = GridOptimum {
                n,
                threshold: Threshold::NegInfinity,
                tau_bar: expected_usage(ch, cost, &PilotPolicy { n: n as f64, threshold: Threshold::NegInfinity }),
            };
            for i in 0..t_steps {
                let threshold = Threshold::Finite(t_lo + i as f64 * dt);
                let tau_bar = expected_usage(ch, cost, &PilotPolicy { n: n as f64, threshold });
                if tau_bar < best.tau_bar {
                    best = GridOptimum { n, threshold, tau_bar };
                }
            }
            best
        })
        .collect();
    Ok(rows
        .into_iter()
        .reduce(|best, row| if row.tau_bar < best.tau_bar { row } else { best })
        .expect("grid has at least one row"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::level_set::{f, h};

    fn reference_point() -> (ChannelSpec, TransmissionCost) {
        // Costs frozen from the sphere-packing model at k = 128, ε = 1e-2.
        (
            ChannelSpec::from_snr(0.5, 1.5, 0.5).unwrap(),
            TransmissionCost::new(194.254_315_636_433_2, 441.749_325_002_556_9).unwrap(),
        )
    }

    #[test]
    fn stationary_point_invariants() {
        let (ch, cost) = reference_point();
        let sp = solve_real_optimum(&ch, &cost).unwrap();
        assert!(!sp.near_static);
        let g = gradient(&ch, &cost, sp.n_hat, sp.t_hat).unwrap();
        assert!(g.max_abs() <= 1e-8 * (1.0 + sp.tau_bar.abs()), "{g:?}");
        assert!(hessian(&ch, &cost, sp.n_hat, sp.t_hat).unwrap().is_positive_definite());
        assert!(1.0 - sp.g_hat * sp.b_hat > 0.0);
        assert!((f(sp.g_hat) - f(sp.b_hat)).abs() < 1e-10);
        assert!((h(&ch, sp.y).unwrap() - level_equation_rhs(&ch, &cost)).abs() < 1e-10);
        // Nelder–Mead on the raw objective (scipy) lands at n ≈ 9.1740, T ≈ 1.2119.
        assert!((sp.n_hat - 9.1740).abs() < 1e-3, "{sp:?}");
        assert!((sp.t_hat - 1.2119).abs() < 1e-3, "{sp:?}");
        assert!((sp.tau_bar - 252.967_103_5).abs() < 1e-6, "{sp:?}");
    }

    #[test]
    fn larger_cost_gap_raises_the_level() {
        let (ch, cost) = reference_point();
        let base = solve_real_optimum(&ch, &cost).unwrap();
        let wide = TransmissionCost::new(cost.tau_good(), cost.tau_good() + 4.0 * cost.tau_diff()).unwrap();
        let more = solve_real_optimum(&ch, &wide).unwrap();
        assert!(more.y > base.y);
    }

    #[test]
    fn fixed_n_threshold_cases() {
        let (ch, cost) = reference_point();
        let reduction = potential_reduction(&ch, &cost);
        assert_eq!(optimal_threshold_for_n(&ch, &cost, 0).unwrap(), Threshold::Finite(0.0));
        assert_eq!(optimal_threshold_for_n(&ch, &cost, reduction.ceil() as u64).unwrap(), Threshold::NegInfinity);
        for n in [1u64, 3, 9, 10, 50, 123] {
            let t = optimal_threshold_for_n(&ch, &cost, n).unwrap().finite().unwrap();
            let g = gradient(&ch, &cost, n as f64, t).unwrap();
            assert!(g.d_t.abs() <= 1e-9, "n={n} dT={}", g.d_t);
            assert!(hessian(&ch, &cost, n as f64, t).unwrap().tt > 0.0);
        }
    }

    #[test]
    fn no_finite_threshold_when_rejection_never_pays() {
        // p_G τ_diff < n < p_B τ_diff: the slope is positive everywhere.
        let ch = ChannelSpec::from_snr(0.2, 1.5, 0.5).unwrap();
        let cost = TransmissionCost::new(100.0, 300.0).unwrap();
        let n = 100u64;
        assert_eq!(optimal_threshold_for_n(&ch, &cost, n).unwrap(), Threshold::NegInfinity);
        let at = |t: f64| expected_usage(&ch, &cost, &PilotPolicy { n: n as f64, threshold: Threshold::Finite(t) });
        let mut prev = at(-5.0);
        for i in 1..200 {
            let cur = at(-5.0 + 0.05 * i as f64);
            assert!(cur >= prev - 1e-9);
            prev = cur;
        }
    }

    #[test]
    fn optimize_selects_the_better_neighbour() {
        let (ch, cost) = reference_point();
        let opt = optimize(&ch, &cost).unwrap();
        assert!(opt.tau_bar_star < opt.tau_ref);
        assert!(opt.tau_bar_star <= opt.candidates[0].tau_bar.min(opt.candidates[1].tau_bar));
        assert!(opt.reduction > 0.0 && opt.reduction <= potential_reduction(&ch, &cost));
        assert!(opt.n_star == 9 || opt.n_star == 10);
    }

    #[test]
    fn near_static_channel_needs_no_training() {
        let ch = ChannelSpec::from_snr(0.5, 1.0 + 1e-6, 1.0).unwrap();
        let cost = TransmissionCost::new(300.0, 300.0003).unwrap();
        let opt = optimize(&ch, &cost).unwrap();
        assert!(opt.stationary.near_static);
        assert_eq!(opt.n_star, 0);
        assert_eq!(opt.reduction, 0.0);
        assert_eq!(opt.tau_bar_star, opt.tau_ref);
    }

    #[test]
    fn grid_oracle_validates_and_agrees() {
        let (ch, cost) = reference_point();
        assert!(grid_search_oracle(&ch, &cost, 0, -3.0, 5.0, 10).is_err());
        assert!(grid_search_oracle(&ch, &cost, 5, 5.0, -3.0, 10).is_err());
        assert!(grid_search_oracle(&ch, &cost, 5, -3.0, 5.0, 1).is_err());
        let opt = optimize(&ch, &cost).unwrap();
        let grid = grid_search_oracle(&ch, &cost, 60, -3.0, 5.0, 4001).unwrap();
        assert_eq!(grid.n, opt.n_star);
        assert!((grid.tau_bar - opt.tau_bar_star).abs() <= 1e-4 * opt.tau_bar_star);
        assert!(grid.tau_bar <= opt.tau_ref + 1e-12);
    }

    #[test]
    fn grid_oracle_is_deterministic() {
        let (ch, cost) = reference_point();
        let a = grid_search_oracle(&ch, &cost, 30, -3.0, 5.0, 801).unwrap();
        let b = grid_search_oracle(&ch, &cost, 30, -3.0, 5.0, 801).unwrap();
        assert_eq!(a, b);
    }
}
