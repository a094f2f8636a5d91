//! Closed-form term powers against Monte Carlo on a small random network.

use anyhow::Result;
use lsfd_core::channel::LargeScaleFading;
use lsfd_core::lsfd::{lambda, optimal_combiners, term_powers, zf_lsfd_all, LsfdCombiners, TermPowers};
use lsfd_core::receivers::{MeanAccumulator, PowerAccumulator, ReceiverKind, TermExperiment};
use lsfd_core::rng::stream;
use lsfd_core::UserGrid;
use nalgebra::DMatrix;
use rand::Rng;
use rayon::prelude::*;

/// Terms whose closed form is below this fraction of the useful power are
/// treated as cancelled and checked against the useful power instead.
pub const CANCELLED: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CombinerFamily {
    SingleCell,
    /// Identity plus uniform off-diagonal entries in [-0.5, 0.5].
    Random,
    Optimal,
    ZfLsfd,
}

impl CombinerFamily {
    pub const ALL: [CombinerFamily; 4] =
        [CombinerFamily::SingleCell, CombinerFamily::Random, CombinerFamily::Optimal, CombinerFamily::ZfLsfd];

    pub fn name(self) -> &'static str {
        match self {
            CombinerFamily::SingleCell => "single-cell",
            CombinerFamily::Random => "random",
            CombinerFamily::Optimal => "optimal",
            CombinerFamily::ZfLsfd => "zf-lsfd",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ValidationSetup {
    pub cells: usize,
    pub users: usize,
    pub antennas: usize,
    pub samples: u64,
    pub seed: u64,
    pub decoders: Vec<ReceiverKind>,
    pub families: Vec<CombinerFamily>,
}

impl Default for ValidationSetup {
    fn default() -> Self {
        Self {
            cells: 3,
            users: 2,
            antennas: 30,
            samples: 100_000,
            seed: 1,
            decoders: vec![ReceiverKind::MatchedFilter, ReceiverKind::ZeroForcing],
            families: CombinerFamily::ALL.to_vec(),
        }
    }
}

/// Gains normalized to the noise power: own-cell links around 1, cross links
/// around 0.15, powers in [0.5, 2].
pub fn random_instance(seed: u64, cells: usize, users: usize) -> (LargeScaleFading, UserGrid<f64>, UserGrid<f64>) {
    let mut rng = stream(seed, 0);
    let beta = LargeScaleFading::from_fn(cells, users, |j, _, l| {
        let base: f64 = if j == l { 1.0 } else { 0.15 };
        base * rng.random_range(0.5..2.0)
    });
    let p = UserGrid::from_fn(users, cells, |_, _| rng.random_range(0.5..2.0));
    let q = UserGrid::from_fn(users, cells, |_, _| rng.random_range(0.5..2.0));
    (beta, p, q)
}

pub fn random_combiners(kind: ReceiverKind, cells: usize, users: usize, seed: u64) -> LsfdCombiners {
    let mut rng = stream(seed, 1);
    let mats = (0..users)
        .map(|_| DMatrix::from_fn(cells, cells, |j, l| if j == l { 1.0 } else { rng.random_range(-0.5..0.5) }))
        .collect();
    LsfdCombiners::from_real(kind, mats)
}

#[derive(Debug, Clone, PartialEq)]
pub struct TermCheck {
    pub decoder: ReceiverKind,
    pub family: CombinerFamily,
    pub user: (usize, usize),
    pub term: &'static str,
    pub analytic: f64,
    pub empirical: f64,
    /// |empirical − analytic| / analytic, or empirical / useful for cancelled terms.
    pub error: f64,
    pub cancelled: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ValidationReport {
    pub checks: Vec<TermCheck>,
    /// Largest |mean(XY*)| z-score between two terms.
    pub max_correlation_z: f64,
}

impl ValidationReport {
    pub fn max_relative_error(&self) -> f64 {
        self.checks.iter().filter(|c| !c.cancelled).map(|c| c.error).fold(0.0, f64::max)
    }

    /// Largest residual power of a cancelled term, relative to useful power.
    pub fn max_cancelled_residual(&self) -> f64 {
        self.checks.iter().filter(|c| c.cancelled).map(|c| c.error).fold(0.0, f64::max)
    }

    pub fn max_error_for(&self, decoder: ReceiverKind, family: CombinerFamily) -> f64 {
        self.checks
            .iter()
            .filter(|c| !c.cancelled && c.decoder == decoder && c.family == family)
            .map(|c| c.error)
            .fold(0.0, f64::max)
    }
}

const CHUNKS: u64 = 64;

fn chunks(samples: u64) -> Vec<std::ops::Range<u64>> {
    let size = samples.div_ceil(CHUNKS).max(1);
    (0..samples).step_by(size as usize).map(|a| a..(a + size).min(samples)).collect()
}

/// Both Monte Carlo passes, chunked over blocks and merged in chunk order so
/// the result does not depend on the thread count.
pub fn run_parallel(exp: &TermExperiment<'_>, samples: u64) -> Result<UserGrid<lsfd_core::receivers::EmpiricalTerms>> {
    let ranges = chunks(samples);
    let parts: Vec<MeanAccumulator> =
        ranges.par_iter().map(|r| exp.accumulate_means(r.clone())).collect::<lsfd_core::Result<_>>()?;
    let mut means = parts[0].clone();
    for p in &parts[1..] {
        means.merge(p);
    }
    let m = means.means();
    let parts: Vec<PowerAccumulator> =
        ranges.par_iter().map(|r| exp.accumulate_powers(&m, r.clone())).collect::<lsfd_core::Result<_>>()?;
    let mut powers = parts[0].clone();
    for p in &parts[1..] {
        powers.merge(p);
    }
    Ok(exp.finish(&means, &powers))
}

pub fn validate_analytic_vs_monte_carlo(setup: &ValidationSetup) -> Result<ValidationReport> {
    let (beta, p, q) = random_instance(setup.seed, setup.cells, setup.users);
    let m = setup.antennas;
    let mut checks = Vec::new();
    let mut max_z: f64 = 0.0;
    for &kind in &setup.decoders {
        let lam = lambda(kind, &beta, &p, &q, m)?;
        for &family in &setup.families {
            let combiners = match family {
                CombinerFamily::SingleCell => LsfdCombiners::single_cell(kind, setup.cells, setup.users),
                CombinerFamily::Random => random_combiners(kind, setup.cells, setup.users, setup.seed),
                CombinerFamily::Optimal => optimal_combiners(kind, &beta, &p, &q, m)?.0,
                CombinerFamily::ZfLsfd => zf_lsfd_all(kind, &beta)?,
            };
            let exp = TermExperiment {
                beta: &beta,
                p: &p,
                q: &q,
                antennas: m,
                combiners: &combiners,
                seed: setup.seed.wrapping_add(1),
                noise: true,
            };
            let emp = run_parallel(&exp, setup.samples)?;
            for ((k, l), e) in emp.indexed() {
                let t: TermPowers = term_powers(&combiners.column(k, l), &beta, &p, &q, m, &lam, k, l);
                for (term, a, b) in [
                    ("useful", t.useful, e.powers.useful),
                    ("pilot", t.pilot, e.powers.pilot),
                    ("other", t.other, e.powers.other),
                ] {
                    let cancelled = a <= CANCELLED * t.useful;
                    let error = if cancelled { b / e.powers.useful } else { (b - a).abs() / a };
                    checks.push(TermCheck { decoder: kind, family, user: (k, l), term, analytic: a, empirical: b, error, cancelled });
                }
                max_z = e.correlation_z.iter().copied().fold(max_z, f64::max);
            }
        }
    }
    Ok(ValidationReport { checks, max_correlation_z: max_z })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn chunking_covers_range() {
        for n in [1u64, 63, 64, 65, 1000] {
            let c = chunks(n);
            assert_eq!(c.first().unwrap().start, 0);
            assert_eq!(c.last().unwrap().end, n);
            assert!(c.windows(2).all(|w| w[0].end == w[1].start));
        }
    }
}
