//! Drop-level Monte Carlo over user placements and shadowing.

use anyhow::{Context, Result};
use lsfd_core::channel::{sample_large_scale, LargeScaleFading};
use lsfd_core::decentralized::{
    decentralized_power_control, DecentralizedMmse, DecentralizedOptimal, EmpiricalMmse, PowerControlOptions, SinrMode,
};
use lsfd_core::lsfd::{rate_from_sinr, sinr_limit_infinite_m, zf_lsfd_all, LsfdCombiners};
use lsfd_core::power::{optimize_powers_bisection, CombinerModel, FixedCombiners, OptimalLsfd};
use lsfd_core::receivers::ReceiverKind;
use lsfd_core::rng::stream;
use lsfd_core::topology::{build_hex_torus, drop_users, Topology};
use lsfd_core::{NetworkConfig, UserGrid};
use rand::RngCore;
use rayon::prelude::*;

use crate::scenario::{LsfdMode, PowerMode, Scenario};
use crate::stats::{round_sig, Summary};

/// Large-scale state of one drop plus what the schemes need on top of it.
#[derive(Debug, Clone)]
pub struct DropInstance {
    pub beta: LargeScaleFading,
    /// Pilot powers, all at P_max.
    pub p: UserGrid<f64>,
    pub omegas: Vec<Vec<usize>>,
    /// Seed for the simulated statistics of the empirical MMSE scheme.
    pub aux_seed: u64,
}

/// Drop `index` of the run keyed by `seed`. It depends only on (config, seed,
/// index), never on the scheme or on how drops are scheduled.
pub fn draw_drop(cfg: &NetworkConfig, topo: &Topology, seed: u64, index: u64) -> Result<DropInstance> {
    let mut rng = stream(seed, index);
    let users = drop_users(topo, cfg, &mut rng);
    let beta = sample_large_scale(topo, &users, cfg, &mut rng)?;
    let aux_seed = rng.next_u64();
    Ok(DropInstance {
        beta,
        p: UserGrid::filled(cfg.users_per_cell, cfg.num_cells, cfg.p_max_mw),
        omegas: topo.neighborhoods(cfg.neighborhood_size),
        aux_seed,
    })
}

/// Builds the SINR model of the scenario's LSFD scheme and hands it to `f`.
pub fn with_model<R>(
    scenario: &Scenario,
    inst: &DropInstance,
    f: impl FnOnce(&dyn CombinerModel) -> Result<R>,
) -> Result<R> {
    let (beta, p) = (&inst.beta, &inst.p);
    let cfg = &scenario.config;
    let (antennas, kind) = (cfg.num_antennas, scenario.decoder);
    match scenario.lsfd {
        LsfdMode::None => {
            let c = LsfdCombiners::single_cell(kind, cfg.num_cells, cfg.users_per_cell);
            f(&FixedCombiners { beta, p, antennas, combiners: &c })
        }
        LsfdMode::ZfLsfd => {
            let c = zf_lsfd_all(kind, beta)?;
            f(&FixedCombiners { beta, p, antennas, combiners: &c })
        }
        LsfdMode::Optimal => f(&OptimalLsfd { beta, p, antennas, kind }),
        LsfdMode::DecentralizedOptimal => f(&DecentralizedOptimal { beta, p, antennas, kind, omegas: &inst.omegas }),
        LsfdMode::DecentralizedMmse => match kind {
            ReceiverKind::MatchedFilter => f(&DecentralizedMmse::new(kind, beta, p, antennas, &inst.omegas)?),
            ReceiverKind::ZeroForcing => f(&EmpiricalMmse {
                beta,
                p,
                antennas,
                kind,
                omegas: &inst.omegas,
                trials: cfg.trials as u64,
                seed: inst.aux_seed,
            }),
        },
    }
}

/// Powers chosen by the scenario's power mode.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerOutcome {
    pub q: UserGrid<f64>,
    /// Max-min SINR found by bisection.
    pub gamma_opt: Option<f64>,
    /// Whether distributed control met its target everywhere.
    pub target_met: Option<bool>,
}

/// `seed` keys the simulated blocks when power control measures SINRs empirically.
pub fn allocate_powers(scenario: &Scenario, model: &dyn CombinerModel, seed: u64) -> Result<PowerOutcome> {
    let cfg = &scenario.config;
    let q_max = cfg.q_max_mw;
    Ok(match scenario.power {
        PowerMode::Fixed => PowerOutcome {
            q: UserGrid::filled(cfg.users_per_cell, cfg.num_cells, q_max),
            gamma_opt: None,
            target_met: None,
        },
        PowerMode::Bisection => {
            let r = optimize_powers_bisection(model, q_max, &scenario.bisection)?;
            PowerOutcome { q: r.q_opt, gamma_opt: Some(r.gamma_opt), target_met: None }
        }
        PowerMode::Distributed { gamma } => {
            let mut opts = PowerControlOptions::new(scenario.control.relative_epsilon * gamma, scenario.control.max_rounds);
            if let Some(blocks) = scenario.control.empirical_blocks {
                opts.mode = SinrMode::Empirical { blocks, seed };
            }
            let t = decentralized_power_control(model, gamma, q_max, &opts)?;
            PowerOutcome { q: t.final_q().clone(), gamma_opt: None, target_met: Some(t.target_met) }
        }
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct DropOutcome {
    pub q: UserGrid<f64>,
    pub sinr: UserGrid<f64>,
    pub rate: UserGrid<f64>,
    /// Single-cell matched-filter SINR in the M → ∞ limit at the same powers.
    pub sinr_limit: UserGrid<f64>,
    pub gamma_opt: Option<f64>,
    pub target_met: Option<bool>,
}

pub fn evaluate_drop(scenario: &Scenario, inst: &DropInstance) -> Result<DropOutcome> {
    with_model(scenario, inst, |model| {
        let power = allocate_powers(scenario, model, inst.aux_seed.wrapping_add(1))?;
        let sinr = model.sinr(&power.q)?;
        let rate = sinr.map(|s| rate_from_sinr(*s));
        let (k, l) = (sinr.users(), sinr.cells());
        let sinr_limit = UserGrid::from_fn(k, l, |k, l| sinr_limit_infinite_m(&inst.beta, &power.q, k, l));
        Ok(DropOutcome { q: power.q, sinr, rate, sinr_limit, gamma_opt: power.gamma_opt, target_met: power.target_met })
    })
}

pub fn topology_for(cfg: &NetworkConfig) -> Result<Topology> {
    Ok(build_hex_torus(cfg.num_cells, cfg.cell_radius)?)
}

/// Evaluates `f` on drops `0..drops` in parallel; results come back in drop order.
pub fn map_drops<R: Send>(
    cfg: &NetworkConfig,
    drops: u64,
    f: impl Fn(&DropInstance) -> Result<R> + Sync,
) -> Result<Vec<R>> {
    let topo = topology_for(cfg)?;
    (0..drops)
        .into_par_iter()
        .map(|d| {
            let inst = draw_drop(cfg, &topo, cfg.seed, d).with_context(|| format!("drop {d}"))?;
            f(&inst).with_context(|| format!("drop {d}"))
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct RateReport {
    pub scenario: Scenario,
    pub drops: Vec<DropOutcome>,
    pub summary: Summary,
    pub version: String,
}

impl RateReport {
    /// Rates pooled over users in CSV order (drop, cell, user), rounded as written.
    pub fn pooled_rates(&self) -> Vec<f64> {
        pooled(&self.drops, |d| &d.rate).into_iter().map(round_sig).collect()
    }

    pub fn pooled_sinr(&self) -> Vec<f64> {
        pooled(&self.drops, |d| &d.sinr)
    }

    pub fn seed(&self) -> u64 {
        self.scenario.config.seed
    }
}

/// Values pooled in (drop, cell, user) order.
pub fn pooled<'a, T: 'a>(items: &'a [T], grid: impl Fn(&'a T) -> &'a UserGrid<f64>) -> Vec<f64> {
    let mut out = Vec::new();
    for item in items {
        let g = grid(item);
        for l in 0..g.cells() {
            for k in 0..g.users() {
                out.push(g[(k, l)]);
            }
        }
    }
    out
}

pub fn version_string() -> String {
    format!("lsfd-sim {}", env!("CARGO_PKG_VERSION"))
}

pub fn run_scenario(scenario: &Scenario, drops: u64) -> Result<RateReport> {
    scenario.validate()?;
    anyhow::ensure!(drops > 0, "at least one drop is needed");
    let outcomes = map_drops(&scenario.config, drops, |inst| evaluate_drop(scenario, inst))?;
    let mut report =
        RateReport { scenario: scenario.clone(), drops: outcomes, summary: Summary::default(), version: version_string() };
    report.summary = Summary::from_rates(&report.pooled_rates())?;
    Ok(report)
}
