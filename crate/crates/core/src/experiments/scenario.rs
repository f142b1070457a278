//! Scenario files.
//!
//! A scenario is a flat TOML document whose first meaningful key is a
//! format tag:
//!
//! ```toml
//! format = "pilotlen-scenario/1"
//! p_good = 0.5
//! snr_good = 1.5
//! snr_bad = 0.5
//! k = 128
//! epsilon = 0.01
//! sweep = "none"      # or "snr-ratio" / "probability"
//! grid = []
//! ```
//!
//! Unknown keys are rejected so that a misspelled parameter cannot silently
//! fall back to a default.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::Deserialize;

use crate::channel::ChannelSpec;
use crate::error::{Error, Result};
use crate::rcsp::RcspConfig;

pub const FORMAT_TAG: &str = "pilotlen-scenario/1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SweepKind {
    #[default]
    None,
    SnrRatio,
    Probability,
}

impl fmt::Display for SweepKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SweepKind::None => "none",
            SweepKind::SnrRatio => "snr-ratio",
            SweepKind::Probability => "probability",
        })
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawScenario {
    format: String,
    p_good: f64,
    snr_good: f64,
    snr_bad: f64,
    #[serde(default = "default_k")]
    k: u32,
    #[serde(default = "default_epsilon")]
    epsilon: f64,
    #[serde(default)]
    sweep: SweepKind,
    #[serde(default)]
    grid: Vec<f64>,
}

fn default_k() -> u32 {
    RcspConfig::default().k()
}

fn default_epsilon() -> f64 {
    RcspConfig::default().epsilon()
}

/// A validated scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub channel: ChannelSpec,
    pub rcsp: RcspConfig,
    pub sweep: SweepKind,
    pub grid: Vec<f64>,
}

impl Scenario {
    pub fn new(channel: ChannelSpec, rcsp: RcspConfig) -> Self {
        Scenario { channel, rcsp, sweep: SweepKind::None, grid: Vec::new() }
    }

    pub fn with_sweep(mut self, sweep: SweepKind, grid: Vec<f64>) -> Result<Self> {
        self.sweep = sweep;
        self.grid = grid;
        self.validate_sweep()?;
        Ok(self)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        text.parse().map_err(|e: Error| Error::Config(format!("{}: {e}", path.display())))
    }

    fn validate_sweep(&self) -> Result<()> {
        if self.sweep == SweepKind::None {
            return Ok(());
        }
        if self.grid.is_empty() {
            return Err(Error::Config(format!("sweep \"{}\" needs a nonempty grid", self.sweep)));
        }
        for &v in &self.grid {
            let ok = match self.sweep {
                SweepKind::SnrRatio => v >= 1.0 && v.is_finite(),
                SweepKind::Probability => v > 0.0 && v < 1.0,
                SweepKind::None => true,
            };
            if !ok {
                return Err(Error::Config(format!("grid value {v} is invalid for sweep \"{}\"", self.sweep)));
            }
        }
        Ok(())
    }
}

impl FromStr for Scenario {
    type Err = Error;

    fn from_str(text: &str) -> Result<Self> {
        let raw: RawScenario = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        if raw.format != FORMAT_TAG {
            return Err(Error::Config(format!("unsupported format \"{}\", expected \"{FORMAT_TAG}\"", raw.format)));
        }
        let field = |name: &str, e: Error| Error::Config(format!("{name}: {e}"));
        let channel = ChannelSpec::from_snr(raw.p_good, raw.snr_good, raw.snr_bad).map_err(|e| field("channel", e))?;
        let rcsp = RcspConfig::new(raw.k, raw.epsilon).map_err(|e| field("k/epsilon", e))?;
        Scenario::new(channel, rcsp).with_sweep(raw.sweep, raw.grid)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MIDPOINT: &str = r#"
format = "pilotlen-scenario/1"
p_good = 0.5
snr_good = 1.5
snr_bad = 0.5
"#;

    #[test]
    fn parses_with_defaults() {
        let s: Scenario = MIDPOINT.parse().unwrap();
        assert_eq!(s.rcsp, RcspConfig::default());
        assert_eq!(s.sweep, SweepKind::None);
        assert!((s.channel.x_good() - 1.5f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn parses_a_sweep() {
        let text = format!("{MIDPOINT}k = 32\nepsilon = 1e-3\nsweep = \"probability\"\ngrid = [0.1, 0.5]\n");
        let s: Scenario = text.parse().unwrap();
        assert_eq!(s.rcsp.k(), 32);
        assert_eq!(s.sweep, SweepKind::Probability);
        assert_eq!(s.grid, vec![0.1, 0.5]);
    }

    #[test]
    fn unknown_keys_are_rejected_with_location() {
        let text = format!("{MIDPOINT}snr_god = 2.0\n");
        let err = text.parse::<Scenario>().unwrap_err().to_string();
        assert!(err.contains("snr_god"), "{err}");
        assert!(err.contains("line 6"), "{err}");
    }

    #[test]
    fn wrong_or_missing_header_is_rejected() {
        let bad = MIDPOINT.replace("scenario/1", "scenario/2");
        assert!(bad.parse::<Scenario>().unwrap_err().to_string().contains("unsupported format"));
        let missing = MIDPOINT.replace("format = \"pilotlen-scenario/1\"\n", "");
        assert!(missing.parse::<Scenario>().is_err());
    }

    #[test]
    fn invalid_physics_is_a_config_error() {
        let text = MIDPOINT.replace("snr_bad = 0.5", "snr_bad = 2.5");
        assert!(matches!(text.parse::<Scenario>(), Err(Error::Config(_))));
    }

    #[test]
    fn sweep_grids_are_checked() {
        let empty = format!("{MIDPOINT}sweep = \"snr-ratio\"\n");
        assert!(empty.parse::<Scenario>().is_err());
        let low = format!("{MIDPOINT}sweep = \"snr-ratio\"\ngrid = [0.5]\n");
        assert!(low.parse::<Scenario>().is_err());
        let unit = format!("{MIDPOINT}sweep = \"snr-ratio\"\ngrid = [1.0, 2.0]\n");
        assert!(unit.parse::<Scenario>().is_ok());
        let prob = format!("{MIDPOINT}sweep = \"probability\"\ngrid = [1.0]\n");
        assert!(prob.parse::<Scenario>().is_err());
    }
}
