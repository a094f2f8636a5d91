//! Fraction of users reaching a target SINR, with and without power control.

use anyhow::{bail, ensure, Result};
use lsfd_core::UserGrid;

use crate::experiment::{allocate_powers, map_drops, with_model};
use crate::scenario::{PowerMode, Scenario};
use crate::stats::{from_db, to_db};

/// A user counts as served when its SINR is within this fraction below target.
pub const SERVED_SLACK: f64 = 1e-3;

fn count_served(sinr: &UserGrid<f64>, gamma: f64) -> usize {
    sinr.as_slice().iter().filter(|s| **s >= gamma * (1.0 - SERVED_SLACK)).count()
}

/// Pooled SINRs with every user at Q_max.
pub fn full_power_sinr(scenario: &Scenario, drops: u64) -> Result<Vec<f64>> {
    let fixed = Scenario { power: PowerMode::Fixed, ..scenario.clone() };
    fixed.validate()?;
    let per_drop = map_drops(&fixed.config, drops, |inst| {
        with_model(&fixed, inst, |model| {
            let q = UserGrid::filled(fixed.config.users_per_cell, fixed.config.num_cells, fixed.config.q_max_mw);
            Ok(model.sinr(&q)?)
        })
    })?;
    Ok(per_drop.iter().flat_map(|g| g.as_slice().to_vec()).collect())
}

/// Served fraction after distributed power control towards `gamma` (linear).
pub fn served_with_control(scenario: &Scenario, drops: u64, gamma: f64) -> Result<f64> {
    let s = Scenario { power: PowerMode::Distributed { gamma }, ..scenario.clone() };
    s.validate()?;
    let counts = map_drops(&s.config, drops, |inst| {
        with_model(&s, inst, |model| {
            let power = allocate_powers(&s, model, inst.aux_seed.wrapping_add(1))?;
            Ok(count_served(&model.sinr(&power.q)?, gamma))
        })
    })?;
    let users = s.config.users_per_cell * s.config.num_cells;
    Ok(counts.iter().sum::<usize>() as f64 / (users as u64 * drops) as f64)
}

/// Largest target (dB) that at least `fraction` of the users reach at full power.
pub fn served_target_fixed_db(sinr: &[f64], fraction: f64) -> Result<f64> {
    ensure!(!sinr.is_empty(), "no users");
    ensure!(fraction > 0.0 && fraction <= 1.0, "fraction must lie in (0, 1]");
    let mut sorted = sinr.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    let need = ((fraction * n as f64) * (1.0 - 1e-12)).ceil() as usize;
    Ok(to_db(sorted[n - need.clamp(1, n)]))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TargetSearch {
    /// Bracket width at which the search stops, dB.
    pub tolerance_db: f64,
    /// Initial bracket around the full-power target, dB.
    pub below_db: f64,
    pub above_db: f64,
    pub max_evaluations: usize,
}

impl Default for TargetSearch {
    fn default() -> Self {
        Self { tolerance_db: 0.05, below_db: 5.0, above_db: 30.0, max_evaluations: 60 }
    }
}

/// Largest target (dB) that at least `fraction` of the users reach under
/// distributed power control, by bisection on the target.
pub fn served_target_controlled_db(scenario: &Scenario, drops: u64, fraction: f64, search: &TargetSearch) -> Result<f64> {
    let start = served_target_fixed_db(&full_power_sinr(scenario, drops)?, fraction)?;
    let served = |db: f64| served_with_control(scenario, drops, from_db(db));
    let (mut lo, mut hi) = (start - search.below_db, start + search.above_db);
    let mut evals = 0;
    while served(lo)? < fraction {
        lo -= search.below_db;
        evals += 1;
        if evals > search.max_evaluations {
            bail!("no target down to {lo:.1} dB is served for {fraction} of users");
        }
    }
    while served(hi)? >= fraction {
        lo = hi;
        hi += search.above_db;
        evals += 1;
        if evals > search.max_evaluations {
            bail!("every target up to {hi:.1} dB is served");
        }
    }
    while hi - lo > search.tolerance_db && evals < search.max_evaluations {
        let mid = 0.5 * (lo + hi);
        if served(mid)? >= fraction {
            lo = mid;
        } else {
            hi = mid;
        }
        evals += 1;
    }
    Ok(lo)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub gamma_db: f64,
    pub served_fixed: f64,
    pub served_controlled: f64,
}

/// Target SINRs a, a + step, … up to b (inclusive within rounding).
pub fn parse_range(spec: &str) -> Result<Vec<f64>> {
    let parts: Vec<&str> = spec.split(':').collect();
    ensure!(parts.len() == 3, "expected a:b:step, got {spec:?}");
    let v: Vec<f64> = parts.iter().map(|p| p.trim().parse::<f64>()).collect::<Result<_, _>>()?;
    let (a, b, step) = (v[0], v[1], v[2]);
    ensure!(step > 0.0 && b >= a, "need step > 0 and b >= a in {spec:?}");
    let n = ((b - a) / step + 1e-9).floor() as usize;
    Ok((0..=n).map(|i| a + i as f64 * step).collect())
}

pub fn sweep(scenario: &Scenario, drops: u64, targets_db: &[f64]) -> Result<Vec<SweepRow>> {
    let full = full_power_sinr(scenario, drops)?;
    targets_db
        .iter()
        .map(|&db| {
            let gamma = from_db(db);
            let fixed = full.iter().filter(|s| **s >= gamma * (1.0 - SERVED_SLACK)).count() as f64 / full.len() as f64;
            Ok(SweepRow { gamma_db: db, served_fixed: fixed, served_controlled: served_with_control(scenario, drops, gamma)? })
        })
        .collect()
}

pub fn sweep_csv(rows: &[SweepRow]) -> String {
    use crate::stats::format_number;
    let mut out = String::from("gamma_db,served_fixed,served_controlled\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{}\n",
            format_number(r.gamma_db),
            format_number(r.served_fixed),
            format_number(r.served_controlled)
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn range_parsing() {
        assert_eq!(parse_range("0:10:2.5").unwrap(), vec![0.0, 2.5, 5.0, 7.5, 10.0]);
        assert_eq!(parse_range("-3:-3:1").unwrap(), vec![-3.0]);
        assert_eq!(parse_range("0:1:0.1").unwrap().len(), 11);
        assert!(parse_range("0:1").is_err());
        assert!(parse_range("1:0:1").is_err());
        assert!(parse_range("0:1:0").is_err());
    }

    #[test]
    fn fixed_target_serves_requested_fraction() {
        let sinr: Vec<f64> = (1..=100).map(|i| from_db(i as f64)).collect();
        let t = served_target_fixed_db(&sinr, 0.95).unwrap();
        assert!((t - 6.0).abs() < 1e-9);
        let served = sinr.iter().filter(|s| to_db(**s) >= t - 1e-9).count();
        assert_eq!(served, 95);
    }
}
