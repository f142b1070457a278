//! Expected data-transmission length under incremental redundancy, using
//! the rate-compatible sphere-packing (RCSP) error model.
//!
//! After `m` received symbols a `k`-bit message fails to decode with
//! probability
//!
//! ```text
//! P_m(γ) = 1 − F_{χ²(m)}( m (1 + γ) / 2^{2k/m} )
//! ```
//!
//! and the expected number of symbols until success is bounded by
//! `1 + Σ_{m≥1} P_m(γ)`. The series is cut at the first index `m̂` where a
//! Chernoff geometric tail certifies the omitted mass is at most `ε`.

use rayon::prelude::*;

use crate::channel::{ChannelSpec, TransmissionCost};
use crate::error::{Error, Result};
use crate::special::{gamma_q, Probability};

/// Below this the chi-square argument is treated as zero (`P_m = 1`).
const LN_TINY_ARG: f64 = -690.775_527_898_213_7; // ln(1e-300)

const SUM_CHUNK: u64 = 512;

/// Message length and truncation budget.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RcspConfig {
    k: u32,
    epsilon: f64,
}

impl RcspConfig {
    pub fn new(k: u32, epsilon: f64) -> Result<Self> {
        if k == 0 {
            return Err(Error::domain("message length k must be >= 1"));
        }
        if !(epsilon > 0.0 && epsilon < 1.0) {
            return Err(Error::domain(format!("epsilon must lie in (0, 1), got {epsilon}")));
        }
        Ok(RcspConfig { k, epsilon })
    }

    pub fn k(&self) -> u32 {
        self.k
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }
}

impl Default for RcspConfig {
    /// 128-bit messages, `ε = 10⁻²`.
    fn default() -> Self {
        RcspConfig { k: 128, epsilon: 1e-2 }
    }
}

fn check_snr(gamma: f64) -> Result<()> {
    if gamma > 0.0 && gamma.is_finite() {
        Ok(())
    } else {
        Err(Error::domain(format!("SNR must be finite and positive, got {gamma}")))
    }
}

/// Decoding-error probability after `m` symbols at SNR `gamma`.
pub fn error_prob(m: u64, gamma: f64, k: u32) -> Result<Probability> {
    if m == 0 {
        return Err(Error::domain("symbol count m must be >= 1"));
    }
    if k == 0 {
        return Err(Error::domain("message length k must be >= 1"));
    }
    check_snr(gamma)?;
    Ok(Probability::clamped(p_m(m, gamma, k)))
}

#[inline]
pub(crate) fn p_m(m: u64, gamma: f64, k: u32) -> f64 {
    let mf = m as f64;
    // 2^{2k/m} overflows for small m, so the argument is built in logs.
    let ln_arg = mf.ln() + gamma.ln_1p() - (2.0 * k as f64 / mf) * std::f64::consts::LN_2;
    if ln_arg < LN_TINY_ARG {
        return 1.0;
    }
    gamma_q(0.5 * mf, 0.5 * ln_arg.exp())
}

/// `ln r` with `r = (1 + γ/2) e^{−γ/2}`, the Chernoff ratio of the tail.
fn ln_chernoff_ratio(gamma: f64) -> f64 {
    (0.5 * gamma).ln_1p() - 0.5 * gamma
}

/// `r = (1 + γ/2) e^{−γ/2} ∈ (0, 1)`.
pub fn chernoff_ratio(gamma: f64) -> f64 {
    ln_chernoff_ratio(gamma).exp()
}

/// Geometric Chernoff bound on `Σ_{m > m_hat} P_m(γ)`:
/// `r^{(m̂+1)/2} / (1 − √r)`.
pub fn chernoff_tail(gamma: f64, m_hat: u64) -> f64 {
    let ln_r = ln_chernoff_ratio(gamma);
    let one_minus_sqrt_r = -(0.5 * ln_r).exp_m1();
    (0.5 * (m_hat as f64 + 1.0) * ln_r).exp() / one_minus_sqrt_r
}

/// First criterion: `(1 + γ) 2^{−2k/m} > 1 + γ/2`.
fn rate_criterion(m: u64, gamma: f64, k: u32) -> bool {
    gamma.ln_1p() - (2.0 * k as f64 / m as f64) * std::f64::consts::LN_2 > (0.5 * gamma).ln_1p()
}

/// Smallest `m̂ ≥ 1` meeting both the rate criterion and
/// `chernoff_tail(γ, m̂) ≤ ε`.
pub fn truncation_index(gamma: f64, k: u32, epsilon: f64) -> Result<u64> {
    check_snr(gamma)?;
    RcspConfig::new(k, epsilon)?;

    // Rate criterion: m > 2k ln2 / ln((1+γ)/(1+γ/2)).
    let gap = gamma.ln_1p() - (0.5 * gamma).ln_1p();
    let bound = 2.0 * k as f64 * std::f64::consts::LN_2 / gap;
    if !bound.is_finite() || bound > 1e15 {
        return Err(Error::domain(format!("SNR {gamma} is too small for a finite truncation index")));
    }
    let mut m_rate = (bound.floor() as u64).max(1);
    while m_rate > 1 && rate_criterion(m_rate - 1, gamma, k) {
        m_rate -= 1;
    }
    while !rate_criterion(m_rate, gamma, k) {
        m_rate += 1;
    }

    // Tail criterion: (m+1)/2 ln r − ln(1 − √r) ≤ ln ε.
    let ln_r = ln_chernoff_ratio(gamma);
    let ln_den = (-(0.5 * ln_r).exp_m1()).ln();
    let estimate = 2.0 * (epsilon.ln() + ln_den) / ln_r - 1.0;
    let mut m_tail = estimate.max(1.0).ceil() as u64;
    while m_tail > 1 && chernoff_tail(gamma, m_tail - 1) <= epsilon {
        m_tail -= 1;
    }
    while chernoff_tail(gamma, m_tail) > epsilon {
        m_tail += 1;
    }
    Ok(m_rate.max(m_tail))
}

/// Compensated (Neumaier) running sum.
#[derive(Debug, Clone, Copy, Default)]
pub(crate) struct NeumaierSum {
    sum: f64,
    comp: f64,
}

impl NeumaierSum {
    pub(crate) fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub(crate) fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

/// `Σ_{m=first}^{last} P_m(γ)`, chunked across threads with a fixed
/// reduction order.
pub fn error_prob_sum(gamma: f64, k: u32, first: u64, last: u64) -> Result<f64> {
    check_snr(gamma)?;
    if first == 0 || k == 0 {
        return Err(Error::domain("sum must start at m >= 1 with k >= 1"));
    }
    if last < first {
        return Ok(0.0);
    }
    let chunks = (last - first) / SUM_CHUNK + 1;
    let partial: Vec<f64> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let lo = first + c * SUM_CHUNK;
            let hi = (lo + SUM_CHUNK - 1).min(last);
            let mut acc = NeumaierSum::default();
            for m in lo..=hi {
                acc.add(p_m(m, gamma, k));
            }
            acc.value()
        })
        .collect();
    let mut total = NeumaierSum::default();
    for p in partial {
        total.add(p);
    }
    Ok(total.value())
}

/// Truncated expected data length at SNR `gamma` with its certificate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DataUsage {
    /// `1 + Σ_{m=1}^{m̂} P_m(γ)`
    pub tau: f64,
    pub m_hat: u64,
    /// Chernoff bound on the omitted terms; `≤ ε`.
    pub tail_bound: f64,
}

pub fn data_usage(gamma: f64, k: u32, epsilon: f64) -> Result<DataUsage> {
    let m_hat = truncation_index(gamma, k, epsilon)?;
    let tau = 1.0 + error_prob_sum(gamma, k, 1, m_hat)?;
    Ok(DataUsage { tau, m_hat, tail_bound: chernoff_tail(gamma, m_hat) })
}

/// Expected number of data symbols at SNR `gamma`: the truncated RCSP
/// bound, within `epsilon` of the full series.
pub fn expected_data_usage(gamma: f64, k: u32, epsilon: f64) -> Result<f64> {
    Ok(data_usage(gamma, k, epsilon)?.tau)
}

/// Per-state data costs for `ch`: `τ_G` at SNR `x_G²`, `τ_B` at `x_B²`.
pub fn costs_for_channel(ch: &ChannelSpec, cfg: &RcspConfig) -> Result<TransmissionCost> {
    let tau_good = expected_data_usage(ch.snr_good(), cfg.k, cfg.epsilon)?;
    let tau_bad = expected_data_usage(ch.snr_bad(), cfg.k, cfg.epsilon)?;
    if !(tau_good < tau_bad) {
        return Err(Error::Model(format!("good-state cost {tau_good} is not below bad-state cost {tau_bad}")));
    }
    TransmissionCost::new(tau_good, tau_bad)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_validation() {
        assert!(RcspConfig::new(0, 0.01).is_err());
        assert!(RcspConfig::new(128, 0.0).is_err());
        assert!(RcspConfig::new(128, 1.0).is_err());
        let d = RcspConfig::default();
        assert_eq!((d.k(), d.epsilon()), (128, 1e-2));
    }

    #[test]
    fn first_symbol_almost_surely_fails() {
        let p = error_prob(1, 1.0, 128).unwrap().get();
        assert!((1.0 - p).abs() < 1e-12);
        assert!(error_prob(0, 1.0, 128).is_err());
        assert!(error_prob(5, 0.0, 128).is_err());
        assert!(error_prob(5, 1.0, 0).is_err());
    }

    #[test]
    fn long_blocks_decode() {
        let (gamma, k) = (1.5, 128u32);
        let m = 50 * k as u64;
        let p = error_prob(m, gamma, k).unwrap().get();
        // Chernoff bound for the chi-square upper tail: P(χ²_m > a m) ≤ (a e^{1−a})^{m/2}, a > 1.
        let arg_over_m = (1.0 + gamma) * 2f64.powf(-2.0 * k as f64 / m as f64);
        let chernoff = (arg_over_m * (1.0 - arg_over_m).exp()).powf(m as f64 / 2.0);
        assert!(p <= chernoff && p < 1e-6, "p={p} bound={chernoff}");
    }

    #[test]
    fn chernoff_ratio_value() {
        let r = chernoff_ratio(1.5);
        assert!((r - 1.75 * (-0.75f64).exp()).abs() < 1e-15);
        assert!(r > 0.0 && r < 1.0);
        assert!((r - 0.826_6).abs() < 1e-4);
    }

    #[test]
    fn rate_criterion_matches_closed_form() {
        let (gamma, k) = (1.5, 128u32);
        let closed = (256.0 * 2f64.ln() / (2.5f64 / 1.75).ln()).ceil() as u64;
        let scanned = (1..10_000).find(|&m| rate_criterion(m, gamma, k)).unwrap();
        assert_eq!(scanned, closed);
        let m_hat = truncation_index(gamma, k, 1e-2).unwrap();
        assert!(m_hat >= closed);
        assert!(chernoff_tail(gamma, m_hat) <= 1e-2);
    }

    #[test]
    fn truncation_index_is_minimal() {
        for &gamma in &[0.1, 0.5, 1.0, 1.5, 4.0] {
            let m = truncation_index(gamma, 128, 1e-2).unwrap();
            assert!(rate_criterion(m, gamma, 128) && chernoff_tail(gamma, m) <= 1e-2);
            assert!(!(rate_criterion(m - 1, gamma, 128) && chernoff_tail(gamma, m - 1) <= 1e-2));
        }
    }

    #[test]
    fn doubling_k_doubles_the_rate_index() {
        for &gamma in &[0.5, 1.5, 3.0] {
            let a = (1..100_000).find(|&m| rate_criterion(m, gamma, 64)).unwrap();
            let b = (1..100_000).find(|&m| rate_criterion(m, gamma, 128)).unwrap();
            // Integer rounding of the closed form can cost one symbol.
            assert!(b >= 2 * a - 1, "gamma={gamma} a={a} b={b}");
            let ta = truncation_index(gamma, 64, 1e-2).unwrap();
            let tb = truncation_index(gamma, 128, 1e-2).unwrap();
            assert!(tb >= ta);
        }
    }

    #[test]
    fn known_costs_at_reference_snrs() {
        // Frozen from an independent scipy evaluation of the same series.
        let good = data_usage(1.5, 128, 1e-2).unwrap();
        let bad = data_usage(0.5, 128, 1e-2).unwrap();
        assert_eq!(good.m_hat, 498);
        assert_eq!(bad.m_hat, 974);
        assert!((good.tau - 194.254_315_636_433_2).abs() < 1e-8, "{good:?}");
        assert!((bad.tau - 441.749_325_002_556_9).abs() < 1e-8, "{bad:?}");
    }

    #[test]
    fn high_snr_approaches_capacity_floor() {
        let (gamma, k) = (100.0f64, 8u32);
        let floor = 2.0 * k as f64 / (1.0 + gamma).log2();
        let tau = expected_data_usage(gamma, k, 1e-2).unwrap();
        assert!(tau >= floor * 0.75 && tau <= floor * 1.25, "tau={tau} floor={floor}");
    }

    #[test]
    fn halving_epsilon_moves_little() {
        let a = expected_data_usage(1.0, 128, 1e-2).unwrap();
        let b = expected_data_usage(1.0, 128, 5e-3).unwrap();
        assert!(b >= a && b - a <= 1e-2);
    }

    #[test]
    fn costs_are_ordered() {
        let ch = ChannelSpec::from_snr(0.5, 1.5, 0.5).unwrap();
        let cost = costs_for_channel(&ch, &RcspConfig::default()).unwrap();
        assert!(cost.tau_good() < cost.tau_bad());
        assert!(cost.tau_bad().is_finite());
    }
}
