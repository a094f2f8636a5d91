use alloc::format;

use crate::error::{Error, Result};

/// Network and experiment parameters. Powers are in mW, the receiver noise in dBm.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkConfig {
    /// Number of cells L.
    pub num_cells: usize,
    /// Users per cell K (also the number of orthogonal pilots).
    pub users_per_cell: usize,
    /// BS antennas M.
    pub num_antennas: usize,
    /// Neighbouring cells L' that cooperate in decentralized decoding.
    pub neighborhood_size: usize,
    /// Hexagon center-to-vertex distance, km.
    pub cell_radius: f64,
    /// Standard deviation of log-normal shadowing, dB.
    pub shadow_std_db: f64,
    pub p_max_mw: f64,
    pub q_max_mw: f64,
    pub noise_power_dbm: f64,
    /// Users are never dropped closer than this to their own BS, km.
    pub exclusion_radius: f64,
    pub seed: u64,
    /// Channel blocks per large-scale realization for empirical statistics.
    pub trials: usize,
}

impl Default for NetworkConfig {
    fn default() -> Self {
        Self {
            num_cells: 19,
            users_per_cell: 5,
            num_antennas: 100,
            neighborhood_size: 6,
            cell_radius: 1.0,
            shadow_std_db: 8.0,
            p_max_mw: 200.0,
            q_max_mw: 200.0,
            noise_power_dbm: -92.0,
            exclusion_radius: 0.05,
            seed: 1,
            trials: 200,
        }
    }
}

impl NetworkConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |msg: alloc::string::String| Err(Error::Config(msg));
        if self.num_cells == 0 || self.users_per_cell == 0 || self.num_antennas == 0 {
            return fail(format!(
                "num_cells, users_per_cell and num_antennas must be positive (got {}, {}, {})",
                self.num_cells, self.users_per_cell, self.num_antennas
            ));
        }
        if self.num_antennas <= self.users_per_cell {
            return fail(format!(
                "num_antennas ({}) must exceed users_per_cell ({})",
                self.num_antennas, self.users_per_cell
            ));
        }
        if self.neighborhood_size >= self.num_cells {
            return fail(format!(
                "neighborhood_size ({}) must be at most num_cells - 1 ({})",
                self.neighborhood_size,
                self.num_cells - 1
            ));
        }
        if !(self.cell_radius > 0.0) || !self.cell_radius.is_finite() {
            return fail(format!("cell_radius must be positive, got {}", self.cell_radius));
        }
        if !(self.exclusion_radius >= 0.0) || self.exclusion_radius >= self.cell_radius {
            return fail(format!(
                "exclusion_radius ({}) must lie in [0, cell_radius = {})",
                self.exclusion_radius, self.cell_radius
            ));
        }
        if !(self.shadow_std_db >= 0.0) || !self.shadow_std_db.is_finite() {
            return fail(format!("shadow_std_db must be non-negative, got {}", self.shadow_std_db));
        }
        if !(self.p_max_mw > 0.0) || !(self.q_max_mw > 0.0) {
            return fail(format!(
                "p_max_mw and q_max_mw must be positive (got {}, {})",
                self.p_max_mw, self.q_max_mw
            ));
        }
        if !self.noise_power_dbm.is_finite() {
            return fail(format!("noise_power_dbm must be finite, got {}", self.noise_power_dbm));
        }
        if self.trials == 0 {
            return fail("trials must be positive".into());
        }
        Ok(())
    }

    /// Receiver noise power in mW.
    pub fn noise_mw(&self) -> f64 {
        libm::pow(10.0, self.noise_power_dbm / 10.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid() {
        NetworkConfig::default().validate().unwrap();
    }

    #[test]
    fn rejects_zf_infeasible_antenna_count() {
        let cfg = NetworkConfig { num_antennas: 5, ..Default::default() };
        assert!(matches!(cfg.validate(), Err(Error::Config(_))));
    }

    #[test]
    fn rejects_oversized_neighborhood_and_exclusion() {
        let cfg = NetworkConfig { neighborhood_size: 19, ..Default::default() };
        assert!(cfg.validate().is_err());
        let cfg = NetworkConfig { exclusion_radius: 1.0, ..Default::default() };
        assert!(cfg.validate().is_err());
    }
}
