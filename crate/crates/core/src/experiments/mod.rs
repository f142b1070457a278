//! Scenario-level workflows behind the command-line tool: single runs,
//! sweeps and their CSV output.

pub mod csvio;
pub mod scenario;
pub mod sweep;

use std::fmt;

use crate::channel::{expected_usage, potential_reduction, PilotPolicy, Threshold, TransmissionCost};
use crate::error::Result;
use crate::optimizer::{optimize, OptimalPolicy};
use crate::rcsp::costs_for_channel;
use crate::simulator::{simulate, SimConfig, SimResult};

pub use csvio::{read_rows, rows_to_string, write_rows, COLUMNS};
pub use scenario::{Scenario, SweepKind, FORMAT_TAG};
pub use sweep::{
    evaluate_point, probability_channel, ratio_channel, run_vary_probability, run_vary_ratio, RowRejection,
    SweepOutput, SweepRow,
};

/// Agreement band, in standard errors, for the simulation verdict.
pub const VERDICT_SIGMAS: f64 = 3.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Simulated {
    pub result: SimResult,
    /// Analytic `τ̄` of the simulated policy.
    pub expected: f64,
    pub within_band: bool,
}

/// Everything computed for one scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub scenario: Scenario,
    pub cost: TransmissionCost,
    pub potential_reduction: f64,
    pub optimum: OptimalPolicy,
    /// The optimum, or the override when one was given.
    pub policy: PilotPolicy,
    pub policy_usage: f64,
    pub simulation: Option<Simulated>,
}

impl Report {
    pub fn row(&self, sweep_value: f64) -> SweepRow {
        SweepRow::from_optimum(sweep_value, &self.optimum)
    }
}

/// Optimizes `scenario`, evaluates `policy` (default: the optimum) and, if
/// `sim` is given, simulates that policy.
pub fn run_single(scenario: &Scenario, policy: Option<PilotPolicy>, sim: Option<&SimConfig>) -> Result<Report> {
    let ch = &scenario.channel;
    let cost = costs_for_channel(ch, &scenario.rcsp)?;
    let optimum = optimize(ch, &cost)?;
    let policy = policy.unwrap_or_else(|| optimum.policy());
    let policy_usage = expected_usage(ch, &cost, &policy);
    let simulation = sim
        .map(|cfg| {
            simulate(ch, &cost, &policy, cfg).map(|result| Simulated {
                result,
                expected: policy_usage,
                within_band: result.agrees_with(policy_usage, VERDICT_SIGMAS),
            })
        })
        .transpose()?;
    Ok(Report {
        scenario: scenario.clone(),
        potential_reduction: potential_reduction(ch, &cost),
        cost,
        optimum,
        policy,
        policy_usage,
        simulation,
    })
}

impl fmt::Display for Report {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let ch = &self.scenario.channel;
        let o = &self.optimum;
        let s = &o.stationary;
        writeln!(f, "channel      p_G={:.6} x_G^2={:.6} x_B^2={:.6}", ch.p_good(), ch.snr_good(), ch.snr_bad())?;
        writeln!(f, "rcsp         k={} epsilon={}", self.scenario.rcsp.k(), self.scenario.rcsp.epsilon())?;
        writeln!(f, "tau_G        {:.10}", self.cost.tau_good())?;
        writeln!(f, "tau_B        {:.10}", self.cost.tau_bad())?;
        writeln!(f, "delta_tau    {:.10}", self.potential_reduction)?;
        writeln!(
            f,
            "real opt     n_hat={:.8} T_hat={:.8}{}",
            s.n_hat,
            s.t_hat,
            if s.near_static { " (near-static)" } else { "" }
        )?;
        writeln!(f, "integer opt  n*={} T*={}", o.n_star, fmt_threshold(o.t_star))?;
        writeln!(f, "tau*         {:.10}", o.tau_bar_star)?;
        writeln!(f, "tau_ref      {:.10}", o.tau_ref)?;
        writeln!(f, "reduction    {:.10} ({:.4}%)", o.reduction, 100.0 * o.reduction_fraction())?;
        if self.policy != o.policy() {
            writeln!(
                f,
                "policy       n={} T={} tau={:.10}",
                self.policy.n,
                fmt_threshold(self.policy.threshold),
                self.policy_usage
            )?;
        }
        if let Some(sim) = &self.simulation {
            let r = &sim.result;
            writeln!(f, "simulation   trials={} mean={:.6} stderr={:.6}", r.trials, r.mean_usage, r.std_error)?;
            writeln!(
                f,
                "             attempts/packet={:.6} go_rate_good={:.6} go_rate_bad={:.6}",
                r.attempts_per_packet, r.go_rate_good, r.go_rate_bad
            )?;
            let z = (r.mean_usage - sim.expected) / r.std_error;
            let verdict = if sim.within_band { "within 3σ" } else { "OUTSIDE 3σ" };
            writeln!(f, "verdict      {verdict} (z={z:.3})")?;
        }
        Ok(())
    }
}

fn fmt_threshold(t: Threshold) -> String {
    match t {
        Threshold::Finite(v) => format!("{v:.8}"),
        Threshold::NegInfinity => "-inf".into(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{reference_usage, ChannelSpec};
    use crate::rcsp::RcspConfig;

    fn midpoint() -> Scenario {
        Scenario::new(ChannelSpec::from_snr(0.5, 1.5, 0.5).unwrap(), RcspConfig::default())
    }

    #[test]
    fn midpoint_report_with_simulation() {
        let cfg = SimConfig::new(100_000, 2024).unwrap();
        let rep = run_single(&midpoint(), None, Some(&cfg)).unwrap();
        let sim = rep.simulation.unwrap();
        assert!(sim.within_band, "{rep}");
        let text = rep.to_string();
        for key in ["tau_G", "tau_B", "delta_tau", "n_hat", "n*", "tau*", "tau_ref", "within 3σ"] {
            assert!(text.contains(key), "missing {key}:\n{text}");
        }
    }

    #[test]
    fn overrides_reproduce_the_limits() {
        let s = midpoint();
        let cost = costs_for_channel(&s.channel, &s.rcsp).unwrap();
        let tau_ref = reference_usage(&s.channel, &cost);

        let none = PilotPolicy::new(0.0, Threshold::Finite(1.0)).unwrap();
        assert_eq!(run_single(&s, Some(none), None).unwrap().policy_usage, tau_ref);

        let always = PilotPolicy::always_transmit(3.0).unwrap();
        let rep = run_single(&s, Some(always), None).unwrap();
        assert!((rep.policy_usage - (3.0 + tau_ref)).abs() < 1e-12);
        assert!(rep.to_string().contains("T=-inf"));
    }

    #[test]
    fn single_point_sweep_matches_single_run() {
        let rcsp = RcspConfig::default();
        for &p in &[0.2, 0.7] {
            let row = run_vary_probability(&[p], &rcsp).rows[0];
            let s = Scenario::new(probability_channel(p).unwrap(), rcsp);
            assert_eq!(run_single(&s, None, None).unwrap().row(p), row);
        }
    }
}
