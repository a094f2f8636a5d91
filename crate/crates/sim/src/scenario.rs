use std::fmt;
use std::str::FromStr;

use anyhow::{bail, Result};
use lsfd_core::power::{BisectionOptions, Tolerance};
use lsfd_core::receivers::ReceiverKind;
use lsfd_core::NetworkConfig;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LsfdMode {
    /// Every cell decodes only its own BS's first-stage estimate.
    None,
    ZfLsfd,
    Optimal,
    #[serde(rename = "dec-opt")]
    DecentralizedOptimal,
    #[serde(rename = "dec-mmse")]
    DecentralizedMmse,
}

impl LsfdMode {
    pub const ALL: [LsfdMode; 5] =
        [LsfdMode::None, LsfdMode::ZfLsfd, LsfdMode::Optimal, LsfdMode::DecentralizedOptimal, LsfdMode::DecentralizedMmse];

    pub fn is_decentralized(self) -> bool {
        matches!(self, LsfdMode::DecentralizedOptimal | LsfdMode::DecentralizedMmse)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            LsfdMode::None => "none",
            LsfdMode::ZfLsfd => "zf-lsfd",
            LsfdMode::Optimal => "optimal",
            LsfdMode::DecentralizedOptimal => "dec-opt",
            LsfdMode::DecentralizedMmse => "dec-mmse",
        }
    }
}

impl fmt::Display for LsfdMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for LsfdMode {
    type Err = anyhow::Error;
    fn from_str(s: &str) -> Result<Self> {
        LsfdMode::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| anyhow::anyhow!("unknown LSFD mode {s:?} (none, zf-lsfd, optimal, dec-opt, dec-mmse)"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "kebab-case")]
pub enum PowerMode {
    /// Every user transmits data at Q_max.
    Fixed,
    /// Centralized max-min SINR by bisection.
    Bisection,
    /// Per-user updates towards a common target SINR (linear scale).
    Distributed { gamma: f64 },
}

impl fmt::Display for PowerMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PowerMode::Fixed => f.write_str("fixed"),
            PowerMode::Bisection => f.write_str("bisection"),
            PowerMode::Distributed { gamma } => write!(f, "distributed({:.3} dB)", 10.0 * gamma.log10()),
        }
    }
}

/// Settings of the distributed power-control loop.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControlSettings {
    /// Stop once every SINR is within this fraction of the target.
    pub relative_epsilon: f64,
    pub max_rounds: usize,
    /// Measure SINRs over this many simulated blocks per round instead of
    /// evaluating them in closed form.
    pub empirical_blocks: Option<u64>,
}

/// Blocks per round when SINRs are measured by simulation.
pub const EMPIRICAL_SINR_BLOCKS: u64 = 500;

impl Default for ControlSettings {
    fn default() -> Self {
        Self { relative_epsilon: 1e-4, max_rounds: 1000, empirical_blocks: None }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub config: NetworkConfig,
    pub decoder: ReceiverKind,
    pub lsfd: LsfdMode,
    pub power: PowerMode,
    pub bisection: BisectionOptions,
    pub control: ControlSettings,
}

impl Scenario {
    pub fn new(config: NetworkConfig, decoder: ReceiverKind, lsfd: LsfdMode, power: PowerMode) -> Self {
        Self { config, decoder, lsfd, power, bisection: BisectionOptions::default(), control: ControlSettings::default() }
    }

    /// The experiment of the headline figures with the given scheme.
    pub fn headline(decoder: ReceiverKind, lsfd: LsfdMode, power: PowerMode) -> Self {
        Self::new(NetworkConfig::default(), decoder, lsfd, power)
    }

    pub fn validate(&self) -> Result<()> {
        self.config.validate()?;
        if self.lsfd.is_decentralized() && self.config.neighborhood_size + 1 >= self.config.num_cells {
            bail!(
                "{} needs neighborhood_size < num_cells - 1 (got {} with {} cells); use --lsfd optimal instead",
                self.lsfd,
                self.config.neighborhood_size,
                self.config.num_cells
            );
        }
        if let PowerMode::Distributed { gamma } = self.power {
            if !(gamma > 0.0 && gamma.is_finite()) {
                bail!("distributed power control needs a positive finite target, got {gamma}");
            }
        }
        match self.bisection.tolerance {
            Tolerance::Absolute(e) | Tolerance::Relative(e) if !(e > 0.0) => bail!("bisection tolerance must be positive"),
            _ => {}
        }
        if !(self.control.relative_epsilon > 0.0) || self.control.max_rounds == 0 || self.control.empirical_blocks == Some(0) {
            bail!("power control needs a positive epsilon and at least one round");
        }
        Ok(())
    }
}

/// JSON form of a scenario (without the network config, echoed separately).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioEcho {
    pub decoder: String,
    pub lsfd: LsfdMode,
    pub power: PowerMode,
}

impl From<&Scenario> for ScenarioEcho {
    fn from(s: &Scenario) -> Self {
        Self { decoder: s.decoder.to_string(), lsfd: s.lsfd, power: s.power }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mode_names_round_trip() {
        for m in LsfdMode::ALL {
            assert_eq!(m.as_str().parse::<LsfdMode>().unwrap(), m);
            assert_eq!(serde_json::to_string(&m).unwrap(), format!("\"{}\"", m.as_str()));
        }
        assert!("global".parse::<LsfdMode>().is_err());
    }

    #[test]
    fn decentralized_needs_a_proper_neighbourhood() {
        let mut s = Scenario::headline(ReceiverKind::MatchedFilter, LsfdMode::DecentralizedOptimal, PowerMode::Fixed);
        assert!(s.validate().is_ok());
        s.config.neighborhood_size = 18;
        assert!(s.validate().is_err());
        s.lsfd = LsfdMode::Optimal;
        assert!(s.validate().is_ok());
    }

    #[test]
    fn distributed_target_must_be_positive() {
        let s = Scenario::headline(ReceiverKind::ZeroForcing, LsfdMode::Optimal, PowerMode::Distributed { gamma: 0.0 });
        assert!(s.validate().is_err());
    }
}
