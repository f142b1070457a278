//! Monte Carlo simulation of the pilot / go-no-go / transmit renewal process.
//!
//! Each trial delivers one packet: draw the block state, spend `n` pilot
//! symbols, draw the averaged pilot `Ȳ ~ N(x_state, 1/n)`, and either retry on
//! a fresh block (`Ȳ < T`) or transmit. Each trial draws from its own
//! ChaCha stream keyed by `(seed, trial index)`. Trials are tallied in
//! fixed-size chunks that are merged in index order, so results are
//! bit-identical for a given seed regardless of the thread count.

use log::info;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::channel::{ChannelSpec, PilotPolicy, Threshold, TransmissionCost};
use crate::error::{Error, Result};
use crate::rcsp::{p_m, truncation_index, NeumaierSum, RcspConfig};
use crate::special::q;

const CHUNK: u64 = 4096;
/// Refuse to simulate policies that almost never transmit.
const MIN_ACCEPT: f64 = 1e-9;

/// How the data phase is charged once the go decision is taken.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DataModel {
    /// Add `τ_G` or `τ_B` deterministically.
    ExpectedCost,
    /// Draw the decoding stopping time from the monotonized RCSP survival
    /// function of the state's SNR.
    SampledStoppingTime(RcspConfig),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimConfig {
    pub trials: u64,
    pub seed: u64,
    pub data_model: DataModel,
}

impl SimConfig {
    pub fn new(trials: u64, seed: u64) -> Result<Self> {
        if trials == 0 {
            return Err(Error::domain("trials must be >= 1"));
        }
        Ok(SimConfig { trials, seed, data_model: DataModel::ExpectedCost })
    }

    pub fn with_data_model(mut self, data_model: DataModel) -> Self {
        self.data_model = data_model;
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimResult {
    pub trials: u64,
    /// Sample mean of symbols used per delivered packet.
    pub mean_usage: f64,
    pub std_error: f64,
    pub attempts_per_packet: f64,
    pub attempts_std_error: f64,
    /// Fraction of good-state attempts that went ahead.
    pub go_rate_good: f64,
    pub go_rate_bad: f64,
    pub good_attempts: u64,
    pub bad_attempts: u64,
}

impl SimResult {
    /// `|mean − expected| ≤ k σ̂`
    pub fn agrees_with(&self, expected: f64, sigmas: f64) -> bool {
        (self.mean_usage - expected).abs() <= sigmas * self.std_error
    }
}

/// Stopping-time distribution with survival `S(m) = min_{m' ≤ m} P_{m'}(γ)`
/// for `1 ≤ m < m_max`, and all remaining mass at `m_max = 4 m̂`.
#[derive(Debug, Clone)]
pub struct StoppingTimeSampler {
    survival: Vec<f64>,
}

impl StoppingTimeSampler {
    pub fn new(gamma: f64, cfg: &RcspConfig) -> Result<Self> {
        let m_hat = truncation_index(gamma, cfg.k(), cfg.epsilon())?;
        let m_max = 4 * m_hat;
        let mut survival = Vec::with_capacity(m_max as usize - 1);
        let mut running = 1.0f64;
        for m in 1..m_max {
            running = running.min(p_m(m, gamma, cfg.k()));
            survival.push(running);
        }
        Ok(StoppingTimeSampler { survival })
    }

    pub fn m_max(&self) -> u64 {
        self.survival.len() as u64 + 1
    }

    /// `E[M] = 1 + Σ_{m=1}^{m_max−1} S(m)`
    pub fn mean(&self) -> f64 {
        let mut acc = NeumaierSum::default();
        acc.add(1.0);
        for &s in &self.survival {
            acc.add(s);
        }
        acc.value()
    }

    /// Inverse-CDF draw from a uniform `u ∈ [0, 1)`: `M > m` iff `u < S(m)`.
    pub fn sample_from_uniform(&self, u: f64) -> u64 {
        1 + self.survival.partition_point(|&s| s > u) as u64
    }
}

enum DataCharge {
    Expected { good: f64, bad: f64 },
    Sampled { good: StoppingTimeSampler, bad: StoppingTimeSampler },
}

impl DataCharge {
    fn draw<R: Rng>(&self, good_state: bool, rng: &mut R) -> f64 {
        match self {
            DataCharge::Expected { good, bad } => {
                if good_state {
                    *good
                } else {
                    *bad
                }
            }
            DataCharge::Sampled { good, bad } => {
                let sampler = if good_state { good } else { bad };
                sampler.sample_from_uniform(rng.random::<f64>()) as f64
            }
        }
    }
}

#[derive(Debug, Clone, Copy, Default)]
struct Tally {
    usage: NeumaierSum,
    usage_sq: NeumaierSum,
    attempts: u64,
    attempts_sq: u128,
    good_attempts: u64,
    good_go: u64,
    bad_attempts: u64,
    bad_go: u64,
}

impl Tally {
    fn merge(&mut self, other: &Tally) {
        self.usage.add(other.usage.value());
        self.usage_sq.add(other.usage_sq.value());
        self.attempts += other.attempts;
        self.attempts_sq += other.attempts_sq;
        self.good_attempts += other.good_attempts;
        self.good_go += other.good_go;
        self.bad_attempts += other.bad_attempts;
        self.bad_go += other.bad_go;
    }
}

struct Trial<'a> {
    ch: &'a ChannelSpec,
    n: f64,
    /// `None` means every attempt goes ahead.
    threshold: Option<f64>,
    noise_scale: f64,
    data: &'a DataCharge,
}

impl Trial<'_> {
    fn run(&self, rng: &mut ChaCha8Rng, tally: &mut Tally) {
        let mut usage = 0.0;
        let mut attempts = 0u64;
        loop {
            attempts += 1;
            usage += self.n;
            let good = rng.random::<f64>() < self.ch.p_good();
            let go = match self.threshold {
                None => true,
                Some(t) => {
                    let x = if good { self.ch.x_good() } else { self.ch.x_bad() };
                    let z: f64 = rng.sample(StandardNormal);
                    x + self.noise_scale * z >= t
                }
            };
            if good {
                tally.good_attempts += 1;
                tally.good_go += go as u64;
            } else {
                tally.bad_attempts += 1;
                tally.bad_go += go as u64;
            }
            if go {
                usage += self.data.draw(good, rng);
                break;
            }
        }
        tally.usage.add(usage);
        tally.usage_sq.add(usage * usage);
        tally.attempts += attempts;
        tally.attempts_sq += (attempts as u128) * (attempts as u128);
    }
}

/// Runs `cfg.trials` independent packet deliveries under `pol`.
///
/// `pol.n` must be a nonnegative integer. With `n = 0` there is nothing to
/// compare against the threshold and every attempt transmits.
pub fn simulate(ch: &ChannelSpec, cost: &TransmissionCost, pol: &PilotPolicy, cfg: &SimConfig) -> Result<SimResult> {
    if cfg.trials == 0 {
        return Err(Error::domain("trials must be >= 1"));
    }
    if !(pol.n >= 0.0 && pol.n.fract() == 0.0) {
        return Err(Error::domain(format!("simulated pilot length must be a nonnegative integer, got {}", pol.n)));
    }
    let threshold = match pol.threshold {
        Threshold::Finite(t) if pol.n == 0.0 => {
            info!("n = 0 with threshold {t}: no pilots to compare, transmitting unconditionally");
            None
        }
        Threshold::Finite(t) => {
            let sn = pol.n.sqrt();
            let accept = ch.p_good() * q(sn * (t - ch.x_good())) + ch.p_bad() * q(sn * (t - ch.x_bad()));
            if accept < MIN_ACCEPT {
                return Err(Error::domain(format!("acceptance probability {accept:e} is too small to simulate")));
            }
            Some(t)
        }
        Threshold::NegInfinity => None,
    };
    let data = match cfg.data_model {
        DataModel::ExpectedCost => DataCharge::Expected { good: cost.tau_good(), bad: cost.tau_bad() },
        DataModel::SampledStoppingTime(rcsp) => DataCharge::Sampled {
            good: StoppingTimeSampler::new(ch.snr_good(), &rcsp)?,
            bad: StoppingTimeSampler::new(ch.snr_bad(), &rcsp)?,
        },
    };
    let trial =
        Trial { ch, n: pol.n, threshold, noise_scale: if pol.n > 0.0 { 1.0 / pol.n.sqrt() } else { 0.0 }, data: &data };

    let base = ChaCha8Rng::seed_from_u64(cfg.seed);
    let chunks = cfg.trials.div_ceil(CHUNK);
    let tallies: Vec<Tally> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut tally = Tally::default();
            let lo = c * CHUNK;
            let hi = (lo + CHUNK).min(cfg.trials);
            for index in lo..hi {
                let mut rng = base.clone();
                rng.set_stream(index);
                trial.run(&mut rng, &mut tally);
            }
            tally
        })
        .collect();
    let mut total = Tally::default();
    for t in &tallies {
        total.merge(t);
    }

    let count = cfg.trials as f64;
    let mean = total.usage.value() / count;
    let attempts_mean = total.attempts as f64 / count;
    let sample_var = |sum_sq: f64, mean: f64| {
        if cfg.trials < 2 {
            0.0
        } else {
            ((sum_sq - count * mean * mean) / (count - 1.0)).max(0.0)
        }
    };
    let var = sample_var(total.usage_sq.value(), mean);
    let attempts_var = sample_var(total.attempts_sq as f64, attempts_mean);
    let rate = |go: u64, n: u64| if n == 0 { 0.0 } else { go as f64 / n as f64 };

    Ok(SimResult {
        trials: cfg.trials,
        mean_usage: mean,
        std_error: (var / count).sqrt(),
        attempts_per_packet: attempts_mean,
        attempts_std_error: (attempts_var / count).sqrt(),
        go_rate_good: rate(total.good_go, total.good_attempts),
        go_rate_bad: rate(total.bad_go, total.bad_attempts),
        good_attempts: total.good_attempts,
        bad_attempts: total.bad_attempts,
    })
}
