//! Parameter sweeps over the SNR ratio and over the good-state probability.

use rayon::prelude::*;

use crate::channel::{ChannelSpec, Threshold};
use crate::error::{Error, Result};
use crate::optimizer::{optimize, OptimalPolicy};
use crate::rcsp::{costs_for_channel, RcspConfig};

/// Good-state probability used by the ratio sweep.
pub const RATIO_SWEEP_P_GOOD: f64 = 0.5;
/// Fixed SNRs of the probability sweep.
pub const PROBABILITY_SWEEP_SNR: (f64, f64) = (1.5, 0.5);

/// One optimized operating point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepRow {
    pub sweep_value: f64,
    pub n_star: u64,
    pub t_star: Threshold,
    pub tau_star: f64,
    pub tau_ref: f64,
    /// `tau_ref − tau_star`, never negative.
    pub reduction: f64,
    pub reduction_fraction: f64,
    pub n_hat: f64,
    pub t_hat: f64,
}

impl SweepRow {
    pub fn from_optimum(sweep_value: f64, opt: &OptimalPolicy) -> Self {
        SweepRow {
            sweep_value,
            n_star: opt.n_star,
            t_star: opt.t_star,
            tau_star: opt.tau_bar_star,
            tau_ref: opt.tau_ref,
            reduction: opt.reduction,
            reduction_fraction: opt.reduction_fraction(),
            n_hat: opt.stationary.n_hat,
            t_hat: opt.stationary.t_hat,
        }
    }

    pub fn is_consistent(&self) -> bool {
        self.reduction >= 0.0 && self.reduction == self.tau_ref - self.tau_star
    }
}

/// A grid point that produced no row.
#[derive(Debug)]
pub struct RowRejection {
    pub sweep_value: f64,
    pub reason: Error,
}

/// Rows and rejections, each in grid order.
#[derive(Debug, Default)]
pub struct SweepOutput {
    pub rows: Vec<SweepRow>,
    pub rejected: Vec<RowRejection>,
}

impl SweepOutput {
    /// First numerical failure, if any; domain rejections are not counted.
    pub fn numerical_failure(&self) -> Option<&RowRejection> {
        self.rejected.iter().find(|r| r.reason.is_numerical())
    }
}

/// Costs from the RCSP model, then the integer optimum.
pub fn evaluate_point(ch: &ChannelSpec, rcsp: &RcspConfig, sweep_value: f64) -> Result<SweepRow> {
    let cost = costs_for_channel(ch, rcsp)?;
    let opt = optimize(ch, &cost)?;
    Ok(SweepRow::from_optimum(sweep_value, &opt))
}

/// Equal-probability channel with SNR ratio `r = x_G²/x_B²` and unit
/// average SNR.
pub fn ratio_channel(r: f64) -> Result<ChannelSpec> {
    if !(r > 1.0) || !r.is_finite() {
        return Err(Error::domain(format!("SNR ratio {r} must exceed 1 (r = 1 is a static channel)")));
    }
    let snr_bad = 2.0 / (1.0 + r);
    ChannelSpec::from_snr(RATIO_SWEEP_P_GOOD, r * snr_bad, snr_bad)
}

pub fn probability_channel(p_good: f64) -> Result<ChannelSpec> {
    if !(p_good > 0.0 && p_good < 1.0) {
        return Err(Error::domain(format!("p_good = {p_good} must lie strictly between 0 and 1")));
    }
    let (snr_good, snr_bad) = PROBABILITY_SWEEP_SNR;
    ChannelSpec::from_snr(p_good, snr_good, snr_bad)
}

fn run<F>(grid: &[f64], rcsp: &RcspConfig, channel: F) -> SweepOutput
where
    F: Fn(f64) -> Result<ChannelSpec> + Sync,
{
    let results: Vec<Result<SweepRow>> = grid.par_iter().map(|&v| evaluate_point(&channel(v)?, rcsp, v)).collect();
    let mut out = SweepOutput::default();
    for (&v, res) in grid.iter().zip(results) {
        match res {
            Ok(row) => out.rows.push(row),
            Err(reason) => out.rejected.push(RowRejection { sweep_value: v, reason }),
        }
    }
    out
}

/// Sweep of the SNR ratio at `p_G = p_B = 0.5` and unit average SNR.
pub fn run_vary_ratio(grid: &[f64], rcsp: &RcspConfig) -> SweepOutput {
    run(grid, rcsp, ratio_channel)
}

/// Sweep of `p_G` at `x_G² = 1.5`, `x_B² = 0.5`.
pub fn run_vary_probability(grid: &[f64], rcsp: &RcspConfig) -> SweepOutput {
    run(grid, rcsp, probability_channel)
}
