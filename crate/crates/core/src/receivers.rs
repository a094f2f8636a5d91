//! Uplink data phase and the first-stage M-antenna receivers, plus a Monte
//! Carlo estimator of the useful / pilot-contamination / remainder split of the
//! second-stage estimate.

use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use nalgebra::DMatrix;
use rand::Rng;

use crate::channel::{mmse_coefficient, pilot_observation, ChannelBlock, LargeScaleFading};
use crate::error::{Error, Result};
use crate::grid::UserGrid;
use crate::lsfd::{LsfdCombiners, TermPowers};
use crate::rng::{complex_normal, stream};
use crate::{CMatrix, CVector, C64};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ReceiverKind {
    MatchedFilter,
    ZeroForcing,
}

impl fmt::Display for ReceiverKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ReceiverKind::MatchedFilter => "mf",
            ReceiverKind::ZeroForcing => "zf",
        })
    }
}

impl FromStr for ReceiverKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mf" => Ok(ReceiverKind::MatchedFilter),
            "zf" => Ok(ReceiverKind::ZeroForcing),
            other => Err(Error::Config(alloc::format!("unknown decoder `{other}`, expected mf or zf"))),
        }
    }
}

/// Data symbols and powers of every user for one channel use.
#[derive(Debug, Clone, PartialEq)]
pub struct SymbolGrid {
    pub s: UserGrid<C64>,
    pub q: UserGrid<f64>,
}

impl SymbolGrid {
    /// Unit-power complex Gaussian symbols.
    pub fn sample<R: Rng + ?Sized>(q: &UserGrid<f64>, rng: &mut R) -> Self {
        let s = UserGrid::from_fn(q.users(), q.cells(), |_, _| complex_normal(rng));
        Self { s, q: q.clone() }
    }
}

/// y_l = Σ_n Σ_m g_lmn √q_mn s_mn + z_l.
pub fn uplink_rx(beta: &LargeScaleFading, block: &ChannelBlock, symbols: &SymbolGrid, l: usize) -> CVector {
    let mut y = block.data_noise(l).clone();
    for n in 0..beta.num_cells() {
        for m in 0..beta.users_per_cell() {
            let amp = libm::sqrt(beta.get(l, m, n) * symbols.q[(m, n)]);
            if amp != 0.0 {
                y.axpy(symbols.s[(m, n)] * amp, block.h(l, m, n), C64::from(1.0));
            }
        }
    }
    y
}

/// ĝ_jkj for every pilot index k at BS `j`.
pub fn estimates_at_bs(beta: &LargeScaleFading, block: &ChannelBlock, p: &UserGrid<f64>, j: usize) -> Vec<CVector> {
    (0..beta.users_per_cell())
        .map(|k| pilot_observation(beta, block, p, k, j) * C64::from(mmse_coefficient(beta, p, j, k, j)))
        .collect()
}

/// s̃_k = ĝ_k^H y for every estimate.
pub fn matched_filter(g_hat: &[CVector], y: &CVector) -> Vec<C64> {
    g_hat.iter().map(|g| g.dotc(y)).collect()
}

/// V = Ĝ^H (Ĝ Ĝ^H)^{-1}, where row k of Ĝ is ĝ_k^H. Column k of V is v_k.
pub fn zero_forcing_matrix(g_hat: &[CVector], bs: usize) -> Result<CMatrix> {
    let users = g_hat.len();
    let antennas = g_hat.first().map_or(0, |g| g.len());
    if antennas <= users {
        return Err(Error::TooFewAntennas { antennas, users });
    }
    let g_h = CMatrix::from_columns(g_hat);
    let gram = g_h.adjoint() * &g_h;
    let chol = gram.cholesky().ok_or(Error::SingularGram { bs })?;
    let inv = chol.solve(&CMatrix::identity(users, users));
    Ok(g_h * inv)
}

/// s̃_k = v_k^H y.
pub fn zero_forcing_decode(v: &CMatrix, y: &CVector) -> Vec<C64> {
    v.column_iter().map(|c| c.dotc(y)).collect()
}

/// First-stage combining vectors w_jk at BS `j` (ĝ_jkj or v_jk).
pub fn combining_vectors(
    kind: ReceiverKind,
    beta: &LargeScaleFading,
    block: &ChannelBlock,
    p: &UserGrid<f64>,
    j: usize,
) -> Result<Vec<CVector>> {
    let g_hat = estimates_at_bs(beta, block, p, j);
    match kind {
        ReceiverKind::MatchedFilter => Ok(g_hat),
        ReceiverKind::ZeroForcing => {
            let v = zero_forcing_matrix(&g_hat, j)?;
            Ok(v.column_iter().map(|c| c.into_owned()).collect())
        }
    }
}

/// s̃_kj for every pilot index k (rows) and BS j (columns).
pub fn first_stage_outputs(
    kind: ReceiverKind,
    beta: &LargeScaleFading,
    block: &ChannelBlock,
    p: &UserGrid<f64>,
    symbols: &SymbolGrid,
) -> Result<UserGrid<C64>> {
    let (cells, users) = (beta.num_cells(), beta.users_per_cell());
    let mut out = UserGrid::filled(users, cells, C64::new(0.0, 0.0));
    for j in 0..cells {
        let y = uplink_rx(beta, block, symbols, j);
        for (k, w) in combining_vectors(kind, beta, block, p, j)?.iter().enumerate() {
            out[(k, j)] = w.dotc(&y);
        }
    }
    Ok(out)
}

/// Raw second-stage weight a_klj from the hatted coefficient.
pub fn raw_weight(kind: ReceiverKind, a_hat: C64, beta: &LargeScaleFading, p: &UserGrid<f64>, k: usize, j: usize) -> C64 {
    match kind {
        ReceiverKind::MatchedFilter => {
            let eta = mmse_coefficient(beta, p, j, k, j);
            if eta == 0.0 {
                C64::new(0.0, 0.0)
            } else {
                a_hat / eta
            }
        }
        ReceiverKind::ZeroForcing => a_hat * (beta.get(j, k, j) * libm::sqrt(p[(k, j)])),
    }
}

/// Monte Carlo setup for splitting ŝ_kl = Σ_j a*_klj s̃_kj into its parts.
///
/// Writing ŝ_kl = Σ_n C_n √q_kn s_kn + R with C_n = Σ_j a*_klj w_jk^H g_jkn, the
/// useful part is E[C_l] √q_kl s_kl, the pilot part Σ_{n≠l} E[C_n] √q_kn s_kn,
/// and the remainder collects the fluctuations C_n − E[C_n], the other pilot
/// indices and noise. The means are estimated in a first pass over the blocks;
/// a second pass over the same blocks measures the powers.
#[derive(Debug, Clone)]
pub struct TermExperiment<'a> {
    pub beta: &'a LargeScaleFading,
    pub p: &'a UserGrid<f64>,
    pub q: &'a UserGrid<f64>,
    pub antennas: usize,
    pub combiners: &'a LsfdCombiners,
    pub seed: u64,
    /// When false, pilot and data noise are removed from every block.
    pub noise: bool,
}

struct BlockTerms {
    /// C_n per user, flattened (k, l, n).
    c: Vec<C64>,
    r: UserGrid<C64>,
    s: UserGrid<C64>,
}

impl TermExperiment<'_> {
    fn cells(&self) -> usize {
        self.beta.num_cells()
    }

    fn users(&self) -> usize {
        self.beta.users_per_cell()
    }

    /// Whether any user puts nonzero weight on BS `j`.
    fn bs_used(&self, j: usize) -> bool {
        let kind = self.combiners.kind;
        (0..self.users()).any(|k| {
            (0..self.cells()).any(|l| raw_weight(kind, self.combiners.a_hat[k][(j, l)], self.beta, self.p, k, j) != C64::new(0.0, 0.0))
        })
    }

    fn block(&self, index: u64) -> Result<BlockTerms> {
        let (beta, p, q) = (self.beta, self.p, self.q);
        let (cells, users, kind) = (self.cells(), self.users(), self.combiners.kind);
        let mut rng = stream(self.seed, index);
        let mut block = ChannelBlock::sample(cells, users, self.antennas, &mut rng);
        if !self.noise {
            block = block.without_noise();
        }
        let s = SymbolGrid::sample(q, &mut rng).s;

        // coupling[(j·K + k)·L + n] = w_jk^H g_jkn and rest[j·K + k] = w_jk^H (other pilots + noise).
        let mut coupling = alloc::vec![C64::new(0.0, 0.0); cells * users * cells];
        let mut rest = alloc::vec![C64::new(0.0, 0.0); cells * users];
        for j in (0..cells).filter(|&j| self.bs_used(j)) {
            let w = combining_vectors(kind, beta, &block, p, j)?;
            for (k, wk) in w.iter().enumerate() {
                let mut x = wk.dotc(block.data_noise(j));
                for n in 0..cells {
                    coupling[(j * users + k) * cells + n] = wk.dotc(block.h(j, k, n)) * libm::sqrt(beta.get(j, k, n));
                    for m in (0..users).filter(|&m| m != k) {
                        let amp = libm::sqrt(beta.get(j, m, n) * q[(m, n)]);
                        if amp != 0.0 {
                            x += wk.dotc(block.h(j, m, n)) * s[(m, n)] * amp;
                        }
                    }
                }
                rest[j * users + k] = x;
            }
        }

        let mut c = alloc::vec![C64::new(0.0, 0.0); users * cells * cells];
        let mut r = UserGrid::filled(users, cells, C64::new(0.0, 0.0));
        for k in 0..users {
            for l in 0..cells {
                let a = self.combiners.a_hat[k].column(l);
                for j in 0..cells {
                    let w = raw_weight(kind, a[j], beta, p, k, j).conj();
                    if w == C64::new(0.0, 0.0) {
                        continue;
                    }
                    for n in 0..cells {
                        c[(k * cells + l) * cells + n] += w * coupling[(j * users + k) * cells + n];
                    }
                    r[(k, l)] += w * rest[j * users + k];
                }
            }
        }
        Ok(BlockTerms { c, r, s })
    }

    /// First pass over blocks `range`: sums of C_n.
    pub fn accumulate_means(&self, range: core::ops::Range<u64>) -> Result<MeanAccumulator> {
        let mut acc = MeanAccumulator { count: 0, sum: alloc::vec![C64::new(0.0, 0.0); self.users() * self.cells() * self.cells()] };
        for b in range {
            let t = self.block(b)?;
            for (s, c) in acc.sum.iter_mut().zip(&t.c) {
                *s += c;
            }
            acc.count += 1;
        }
        Ok(acc)
    }

    /// Second pass over blocks `range` given the estimated means.
    pub fn accumulate_powers(&self, means: &[C64], range: core::ops::Range<u64>) -> Result<PowerAccumulator> {
        let (cells, users) = (self.cells(), self.users());
        let mut acc = PowerAccumulator::new(users * cells);
        for b in range {
            let t = self.block(b)?;
            for k in 0..users {
                for l in 0..cells {
                    let i = k * cells + l;
                    let base = i * cells;
                    let mut fluct_power = 0.0;
                    let mut useful = C64::new(0.0, 0.0);
                    let mut pilot = C64::new(0.0, 0.0);
                    let mut other = t.r[(k, l)];
                    for n in 0..cells {
                        let amp = libm::sqrt(self.q[(k, n)]);
                        let mean = means[base + n];
                        let dev = t.c[base + n] - mean;
                        fluct_power += self.q[(k, n)] * dev.norm_sqr();
                        other += dev * amp * t.s[(k, n)];
                        if n == l {
                            useful = mean * amp * t.s[(k, n)];
                        } else {
                            pilot += mean * amp * t.s[(k, n)];
                        }
                    }
                    let e = &mut acc.entries[i];
                    e.fluctuation += fluct_power;
                    e.rest += t.r[(k, l)].norm_sqr();
                    e.sampled[0] += useful.norm_sqr();
                    e.sampled[1] += pilot.norm_sqr();
                    e.sampled[2] += other.norm_sqr();
                    let pairs = [(useful, pilot), (useful, other), (pilot, other)];
                    for (slot, (x, y)) in pairs.iter().enumerate() {
                        e.cross[slot] += x * y.conj();
                        e.cross_sq[slot] += x.norm_sqr() * y.norm_sqr();
                    }
                }
            }
            acc.count += 1;
        }
        Ok(acc)
    }

    /// Turns merged accumulators into per-user term statistics.
    pub fn finish(&self, means: &MeanAccumulator, powers: &PowerAccumulator) -> UserGrid<EmpiricalTerms> {
        let cells = self.cells();
        let mean = means.means();
        let nb = powers.count as f64;
        UserGrid::from_fn(self.users(), cells, |k, l| {
            let i = k * cells + l;
            let e = &powers.entries[i];
            let coherent = |n: usize| self.q[(k, n)] * mean[i * cells + n].norm_sqr();
            let expected = TermPowers {
                useful: coherent(l),
                pilot: (0..cells).filter(|&n| n != l).map(coherent).sum(),
                other: (e.fluctuation + e.rest) / nb,
            };
            let sampled = TermPowers { useful: e.sampled[0] / nb, pilot: e.sampled[1] / nb, other: e.sampled[2] / nb };
            let z = |slot: usize| {
                let se = libm::sqrt(e.cross_sq[slot] / nb / nb);
                if se > 0.0 {
                    (e.cross[slot] / nb).norm() / se
                } else {
                    0.0
                }
            };
            EmpiricalTerms { powers: expected, sampled, correlation_z: [z(0), z(1), z(2)] }
        })
    }

    /// Both passes over blocks `0..samples`, sequentially.
    pub fn run(&self, samples: u64) -> Result<UserGrid<EmpiricalTerms>> {
        let means = self.accumulate_means(0..samples)?;
        let powers = self.accumulate_powers(&means.means(), 0..samples)?;
        Ok(self.finish(&means, &powers))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MeanAccumulator {
    count: u64,
    sum: Vec<C64>,
}

impl MeanAccumulator {
    pub fn merge(&mut self, other: &MeanAccumulator) {
        self.count += other.count;
        for (a, b) in self.sum.iter_mut().zip(&other.sum) {
            *a += b;
        }
    }

    /// Sample means of C_n, flattened (k, l, n).
    pub fn means(&self) -> Vec<C64> {
        let n = self.count.max(1) as f64;
        self.sum.iter().map(|s| s / n).collect()
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
struct PowerEntry {
    fluctuation: f64,
    rest: f64,
    sampled: [f64; 3],
    cross: [C64; 3],
    cross_sq: [f64; 3],
}

#[derive(Debug, Clone, PartialEq)]
pub struct PowerAccumulator {
    count: u64,
    entries: Vec<PowerEntry>,
}

impl PowerAccumulator {
    fn new(len: usize) -> Self {
        Self { count: 0, entries: alloc::vec![PowerEntry::default(); len] }
    }

    pub fn merge(&mut self, other: &PowerAccumulator) {
        self.count += other.count;
        for (a, b) in self.entries.iter_mut().zip(&other.entries) {
            a.fluctuation += b.fluctuation;
            a.rest += b.rest;
            for s in 0..3 {
                a.sampled[s] += b.sampled[s];
                a.cross[s] += b.cross[s];
                a.cross_sq[s] += b.cross_sq[s];
            }
        }
    }
}

/// Monte Carlo estimate of the term split for one user.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EmpiricalTerms {
    /// Powers averaged analytically over the unit-power symbols.
    pub powers: TermPowers,
    /// Powers of the terms formed with sampled symbols.
    pub sampled: TermPowers,
    /// |mean(X Y*)| in standard errors for (useful, pilot), (useful, other), (pilot, other).
    pub correlation_z: [f64; 3],
}

/// Monte Carlo term powers of every user over `samples` blocks.
pub fn empirical_term_powers(experiment: &TermExperiment<'_>, samples: u64) -> Result<UserGrid<EmpiricalTerms>> {
    experiment.run(samples)
}

/// Frobenius norm of V^H Ĝ^H − I.
pub fn zero_forcing_residual(v: &CMatrix, g_hat: &[CVector]) -> f64 {
    let g_h = CMatrix::from_columns(g_hat);
    let prod = v.adjoint() * g_h;
    (prod - DMatrix::identity(g_hat.len(), g_hat.len())).norm()
}
