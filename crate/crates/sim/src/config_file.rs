//! TOML configuration files.
//!
//! Keys are the `NetworkConfig` field names, all optional; unset keys keep
//! their defaults. Unknown and duplicate keys are errors.

use std::path::Path;

use anyhow::{Context, Result};
use lsfd_core::NetworkConfig;
use serde::{Deserialize, Serialize};

pub fn parse_config(text: &str) -> Result<NetworkConfig> {
    let echo: ConfigEcho = toml::from_str(text)?;
    let cfg = NetworkConfig::from(&echo);
    cfg.validate()?;
    Ok(cfg)
}

pub fn load_config(path: &Path) -> Result<NetworkConfig> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    parse_config(&text).with_context(|| format!("in {}", path.display()))
}

/// Writes a config back in the file format; `parse_config(format_config(c)) == c`.
/// Fails for seeds above `i64::MAX`, which TOML integers cannot hold.
pub fn format_config(cfg: &NetworkConfig) -> Result<String> {
    Ok(toml::to_string(&ConfigEcho::from(cfg))?)
}

/// Serializable mirror of `NetworkConfig`, used for config files and the JSON echo.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConfigEcho {
    pub num_cells: usize,
    pub users_per_cell: usize,
    pub num_antennas: usize,
    pub neighborhood_size: usize,
    pub cell_radius: f64,
    pub shadow_std_db: f64,
    pub p_max_mw: f64,
    pub q_max_mw: f64,
    pub noise_power_dbm: f64,
    pub exclusion_radius: f64,
    pub seed: u64,
    pub trials: usize,
}

impl Default for ConfigEcho {
    fn default() -> Self {
        Self::from(&NetworkConfig::default())
    }
}

impl From<&NetworkConfig> for ConfigEcho {
    fn from(c: &NetworkConfig) -> Self {
        Self {
            num_cells: c.num_cells,
            users_per_cell: c.users_per_cell,
            num_antennas: c.num_antennas,
            neighborhood_size: c.neighborhood_size,
            cell_radius: c.cell_radius,
            shadow_std_db: c.shadow_std_db,
            p_max_mw: c.p_max_mw,
            q_max_mw: c.q_max_mw,
            noise_power_dbm: c.noise_power_dbm,
            exclusion_radius: c.exclusion_radius,
            seed: c.seed,
            trials: c.trials,
        }
    }
}

impl From<&ConfigEcho> for NetworkConfig {
    fn from(e: &ConfigEcho) -> Self {
        Self {
            num_cells: e.num_cells,
            users_per_cell: e.users_per_cell,
            num_antennas: e.num_antennas,
            neighborhood_size: e.neighborhood_size,
            cell_radius: e.cell_radius,
            shadow_std_db: e.shadow_std_db,
            p_max_mw: e.p_max_mw,
            q_max_mw: e.q_max_mw,
            noise_power_dbm: e.noise_power_dbm,
            exclusion_radius: e.exclusion_radius,
            seed: e.seed,
            trials: e.trials,
        }
    }
}
