//! Channel statistics, per-state data costs, pilot policies, and the expected
//! channel usage `τ̄(n, T)` with its exact first and second derivatives.
//!
//! With `Q_G = Q(√n (T − x_G))`, `Q_B = Q(√n (T − x_B))`:
//!
//! ```text
//! τ̄(n, T) = (n + p_B Q_B τ_diff) / (p_G Q_G + p_B Q_B) + τ_G
//! ```
//!
//! The renewal argument behind it: each attempt costs `n` pilots, is accepted
//! with probability `p_G Q_G + p_B Q_B`, and an accepted attempt costs `τ_G`
//! or `τ_B` depending on the state.

use std::fmt;

use crate::error::{Error, Result};
use crate::special::{phi, q};

/// Two-state block-fading statistics. Amplitudes are `√SNR` with unit noise
/// power.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelSpec {
    p_good: f64,
    p_bad: f64,
    x_good: f64,
    x_bad: f64,
}

impl ChannelSpec {
    pub fn new(p_good: f64, x_good: f64, x_bad: f64) -> Result<Self> {
        if !(p_good > 0.0 && p_good < 1.0) {
            return Err(Error::domain(format!("p_good must lie strictly inside (0, 1), got {p_good}")));
        }
        if !(x_bad > 0.0 && x_bad.is_finite() && x_good.is_finite()) {
            return Err(Error::domain(format!(
                "amplitudes must be finite and positive, got x_good={x_good}, x_bad={x_bad}"
            )));
        }
        if !(x_good > x_bad) {
            return Err(Error::domain(format!("x_good must exceed x_bad, got x_good={x_good}, x_bad={x_bad}")));
        }
        Ok(ChannelSpec { p_good, p_bad: 1.0 - p_good, x_good, x_bad })
    }

    /// Builds the channel from linear SNRs `x_G²`, `x_B²`.
    pub fn from_snr(p_good: f64, snr_good: f64, snr_bad: f64) -> Result<Self> {
        if !(snr_good > 0.0 && snr_bad > 0.0) {
            return Err(Error::domain(format!("SNRs must be positive, got snr_good={snr_good}, snr_bad={snr_bad}")));
        }
        Self::new(p_good, snr_good.sqrt(), snr_bad.sqrt())
    }

    #[inline]
    pub fn p_good(&self) -> f64 {
        self.p_good
    }
    #[inline]
    pub fn p_bad(&self) -> f64 {
        self.p_bad
    }
    #[inline]
    pub fn x_good(&self) -> f64 {
        self.x_good
    }
    #[inline]
    pub fn x_bad(&self) -> f64 {
        self.x_bad
    }
    pub fn snr_good(&self) -> f64 {
        self.x_good * self.x_good
    }
    pub fn snr_bad(&self) -> f64 {
        self.x_bad * self.x_bad
    }
}

/// Expected data-transmission lengths (in symbols) in each state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransmissionCost {
    tau_good: f64,
    tau_bad: f64,
}

impl TransmissionCost {
    pub fn new(tau_good: f64, tau_bad: f64) -> Result<Self> {
        if !(tau_good > 0.0 && tau_bad.is_finite() && tau_good < tau_bad) {
            return Err(Error::domain(format!(
                "costs must satisfy 0 < tau_good < tau_bad, got tau_good={tau_good}, tau_bad={tau_bad}"
            )));
        }
        Ok(TransmissionCost { tau_good, tau_bad })
    }

    #[inline]
    pub fn tau_good(&self) -> f64 {
        self.tau_good
    }
    #[inline]
    pub fn tau_bad(&self) -> f64 {
        self.tau_bad
    }
    #[inline]
    pub fn tau_diff(&self) -> f64 {
        self.tau_bad - self.tau_good
    }

    /// Same costs multiplied by `factor > 0`.
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        Self::new(self.tau_good * factor, self.tau_bad * factor)
    }
}

/// Go/no-go threshold on the averaged pilot. `NegInfinity` means the
/// transmitter always proceeds after training.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Threshold {
    Finite(f64),
    NegInfinity,
}

impl Threshold {
    pub fn finite(self) -> Option<f64> {
        match self {
            Threshold::Finite(t) => Some(t),
            Threshold::NegInfinity => None,
        }
    }

    /// `f64` view, with `NegInfinity` mapped to `-∞`.
    pub fn as_f64(self) -> f64 {
        self.finite().unwrap_or(f64::NEG_INFINITY)
    }

    /// Inverse of [`Threshold::as_f64`]; `+∞` and NaN are rejected.
    pub fn from_f64(t: f64) -> Result<Self> {
        if t == f64::NEG_INFINITY {
            Ok(Threshold::NegInfinity)
        } else if t.is_finite() {
            Ok(Threshold::Finite(t))
        } else {
            Err(Error::domain(format!("threshold must be finite or -inf, got {t}")))
        }
    }
}

impl fmt::Display for Threshold {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Threshold::Finite(t) => write!(f, "{t}"),
            Threshold::NegInfinity => f.write_str("-inf"),
        }
    }
}

/// A pilot length and threshold. `n` is real during the analysis and an
/// integer for a deployable policy.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PilotPolicy {
    pub n: f64,
    pub threshold: Threshold,
}

impl PilotPolicy {
    pub fn new(n: f64, threshold: Threshold) -> Result<Self> {
        if !(n >= 0.0 && n.is_finite()) {
            return Err(Error::domain(format!("pilot length must be finite and >= 0, got {n}")));
        }
        Ok(PilotPolicy { n, threshold })
    }

    pub fn always_transmit(n: f64) -> Result<Self> {
        Self::new(n, Threshold::NegInfinity)
    }
}

/// `τ̄_ref = p_G τ_G + p_B τ_B`: expected usage without training.
pub fn reference_usage(ch: &ChannelSpec, cost: &TransmissionCost) -> f64 {
    ch.p_good * cost.tau_good + ch.p_bad * cost.tau_bad
}

/// `Δτ̄ = p_B τ_diff`: the largest reduction any policy can achieve.
pub fn potential_reduction(ch: &ChannelSpec, cost: &TransmissionCost) -> f64 {
    ch.p_bad * cost.tau_diff()
}

/// Expected number of symbols (pilots over all attempts plus data) needed to
/// deliver one packet. Returns `+∞` when both acceptance probabilities
/// underflow, i.e. the threshold is effectively `+∞`.
pub fn expected_usage(ch: &ChannelSpec, cost: &TransmissionCost, pol: &PilotPolicy) -> f64 {
    let n = pol.n;
    if n == 0.0 {
        return reference_usage(ch, cost);
    }
    let t = match pol.threshold {
        Threshold::NegInfinity => return n + reference_usage(ch, cost),
        Threshold::Finite(t) => t,
    };
    let sn = n.sqrt();
    let q_good = q(sn * (t - ch.x_good));
    let q_bad = q(sn * (t - ch.x_bad));
    let accept = ch.p_good * q_good + ch.p_bad * q_bad;
    if accept <= 0.0 {
        return f64::INFINITY;
    }
    (n + ch.p_bad * q_bad * cost.tau_diff()) / accept + cost.tau_good
}

/// `(∂τ̄/∂T, ∂τ̄/∂n)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Gradient {
    pub d_t: f64,
    pub d_n: f64,
}

impl Gradient {
    pub fn max_abs(&self) -> f64 {
        self.d_t.abs().max(self.d_n.abs())
    }
}

/// Second partials of `τ̄` in the `(T, n)` ordering.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Hessian {
    pub tt: f64,
    pub tn: f64,
    pub nt: f64,
    pub nn: f64,
}

impl Hessian {
    pub fn det(&self) -> f64 {
        self.tt * self.nn - self.tn * self.nt
    }

    /// Both leading principal minors positive.
    pub fn is_positive_definite(&self) -> bool {
        self.tt > 0.0 && self.det() > 0.0
    }
}

/// `Q(√n (T − x))` and its partials in `T` and `n`.
#[derive(Debug, Clone, Copy)]
struct TailPartials {
    value: f64,
    t: f64,
    n: f64,
    tt: f64,
    tn: f64,
    nn: f64,
}

impl TailPartials {
    fn at(n: f64, t: f64, x: f64) -> Self {
        let sn = n.sqrt();
        let u = sn * (t - x);
        let d = phi(u);
        TailPartials {
            value: q(u),
            t: -d * sn,
            n: -d * u / (2.0 * n),
            tt: u * d * n,
            tn: d * (u * u - 1.0) / (2.0 * sn),
            nn: d * u * (1.0 + u * u) / (4.0 * n * n),
        }
    }
}

/// Numerator `N = n + p_B τ_diff Q_B` and denominator `D = p_G Q_G + p_B Q_B`
/// of `τ̄ − τ_G` with their partials.
struct Ratio {
    num: [f64; 6],
    den: [f64; 6],
}

// Indices into the partial arrays.
const V: usize = 0;
const T: usize = 1;
const N: usize = 2;
const TT: usize = 3;
const TN: usize = 4;
const NN: usize = 5;

impl Ratio {
    fn at(ch: &ChannelSpec, cost: &TransmissionCost, n: f64, t: f64) -> Result<Self> {
        if !(n > 0.0 && n.is_finite()) {
            return Err(Error::domain(format!(
                "derivatives require n > 0 (the n-derivative is unbounded at n = 0), got {n}"
            )));
        }
        if !t.is_finite() {
            return Err(Error::domain(format!("derivatives require a finite threshold, got {t}")));
        }
        let g = TailPartials::at(n, t, ch.x_good);
        let b = TailPartials::at(n, t, ch.x_bad);
        let w = ch.p_bad * cost.tau_diff();
        let num = [n + w * b.value, w * b.t, 1.0 + w * b.n, w * b.tt, w * b.tn, w * b.nn];
        let mix = |fg: f64, fb: f64| ch.p_good * fg + ch.p_bad * fb;
        let den =
            [mix(g.value, b.value), mix(g.t, b.t), mix(g.n, b.n), mix(g.tt, b.tt), mix(g.tn, b.tn), mix(g.nn, b.nn)];
        if den[V] <= 0.0 {
            return Err(Error::domain(format!("acceptance probability underflows at n={n}, T={t}")));
        }
        Ok(Ratio { num, den })
    }

    /// `R = N/D`, and `R_x = (N_x − R D_x)/D`.
    fn first(&self) -> (f64, f64, f64) {
        let r = self.num[V] / self.den[V];
        let r_t = (self.num[T] - r * self.den[T]) / self.den[V];
        let r_n = (self.num[N] - r * self.den[N]) / self.den[V];
        (r, r_t, r_n)
    }
}

/// Closed-form gradient of `τ̄` at an interior point (`n > 0`, finite `T`).
pub fn gradient(ch: &ChannelSpec, cost: &TransmissionCost, n: f64, t: f64) -> Result<Gradient> {
    let (_, d_t, d_n) = Ratio::at(ch, cost, n, t)?.first();
    Ok(Gradient { d_t, d_n })
}

/// Closed-form Hessian of `τ̄` at an interior point.
pub fn hessian(ch: &ChannelSpec, cost: &TransmissionCost, n: f64, t: f64) -> Result<Hessian> {
    let ratio = Ratio::at(ch, cost, n, t)?;
    let (r, r_t, r_n) = ratio.first();
    let (num, den) = (&ratio.num, &ratio.den);
    // Differentiating R·D = N twice:
    // R_xy = (N_xy − R_x D_y − R_y D_x − R D_xy) / D
    let second = |xy: usize, rx: f64, dy: f64, ry: f64, dx: f64| (num[xy] - rx * dy - ry * dx - r * den[xy]) / den[V];
    let tt = second(TT, r_t, den[T], r_t, den[T]);
    let tn = second(TN, r_t, den[N], r_n, den[T]);
    let nn = second(NN, r_n, den[N], r_n, den[N]);
    Ok(Hessian { tt, tn, nt: tn, nn })
}

/// Sign-equivalent form of `∂τ̄/∂T` for fixed `n > 0`, together with its
/// `T`-derivative.
///
/// `∂τ̄/∂T = √n φ(u_B) / D² · s(T)` with
/// `s(T) = N (p_G ρ + p_B) − p_B τ_diff D`, `ρ = φ(u_G)/φ(u_B) = exp(n Δx (T − x̄))`.
/// Dividing out the positive factor keeps the sign computable where both
/// densities underflow, which is what bracketing the fixed-`n` threshold
/// needs. As `T → −∞`, `s → p_B (n − p_G τ_diff)`.
pub(crate) fn threshold_slope_scaled(ch: &ChannelSpec, cost: &TransmissionCost, n: f64, t: f64) -> (f64, f64) {
    let sn = n.sqrt();
    let u_good = sn * (t - ch.x_good);
    let u_bad = sn * (t - ch.x_bad);
    let dx = ch.x_good - ch.x_bad;
    let mid = 0.5 * (ch.x_good + ch.x_bad);
    let rho = (n * dx * (t - mid)).exp();
    let w = ch.p_bad * cost.tau_diff();

    let q_good = q(u_good);
    let q_bad = q(u_bad);
    let num = n + w * q_bad;
    let den = ch.p_good * q_good + ch.p_bad * q_bad;
    let s = num * (ch.p_good * rho + ch.p_bad) - w * den;

    let d_num = -w * sn * phi(u_bad);
    let d_den = -sn * (ch.p_good * phi(u_good) + ch.p_bad * phi(u_bad));
    let d_rho = n * dx * rho;
    let ds = d_num * (ch.p_good * rho + ch.p_bad) + num * ch.p_good * d_rho - w * d_den;
    (s, ds)
}
