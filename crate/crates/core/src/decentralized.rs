//! Decentralized LSFD: every cell combines only the first-stage estimates of
//! the BSs in its neighbourhood Ω(l).
//!
//! Local vectors are ordered like Ω(l) (ascending cell index). The interference
//! terms λ still account for the whole network; only the combining support is
//! restricted.

use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};

use crate::channel::{mmse_coefficient, ChannelBlock, LargeScaleFading};
use crate::error::{Error, Result};
use crate::grid::UserGrid;
use crate::linalg::{hermitian_part, hpd_solve, spd_solve};
use crate::lsfd::{lambda, LambdaGrid, LsfdCombiners};
use crate::power::{distributed_power_update, relative_gap, CombinerModel, Link, SinrModel};
use crate::receivers::{first_stage_outputs, raw_weight, ReceiverKind, SymbolGrid};
use crate::rng::stream;
use crate::{CMatrix, CVector, C64};

/// β^(l)_kn for every n and Λ^(l)_k, restricted to the rows in Ω(l).
#[derive(Debug, Clone, PartialEq)]
pub struct Restriction {
    pub betas: Vec<DVector<f64>>,
    pub lambda: DVector<f64>,
}

pub fn restrict(beta: &LargeScaleFading, omega: &[usize], lambda: &LambdaGrid, k: usize) -> Restriction {
    let betas = (0..beta.num_cells())
        .map(|n| DVector::from_iterator(omega.len(), omega.iter().map(|&j| beta.get(j, k, n))))
        .collect();
    let lambda = DVector::from_iterator(omega.len(), omega.iter().map(|&j| lambda.get(j, k)));
    Restriction { betas, lambda }
}

/// D_k = diag(η_kj : j ∈ Ω(l)) as a vector.
pub fn eta_diagonal(beta: &LargeScaleFading, p: &UserGrid<f64>, omega: &[usize], k: usize) -> DVector<f64> {
    DVector::from_iterator(omega.len(), omega.iter().map(|&j| mmse_coefficient(beta, p, j, k, j)))
}

/// Writes a local combiner into a full-length column, zero outside Ω(l).
pub fn pad<T: nalgebra::ComplexField + Copy>(local: &DVector<T>, omega: &[usize], cells: usize) -> DVector<T> {
    let mut full = DVector::zeros(cells);
    for (i, &j) in omega.iter().enumerate() {
        full[j] = local[i];
    }
    full
}

/// Σ_{n≠l} β^(l)_kn β^(l)T_kn p_kn q_kn M + Λ^(l)_k.
fn restricted_interference(r: &Restriction, p: &UserGrid<f64>, q: &UserGrid<f64>, antennas: usize, k: usize, l: usize) -> DMatrix<f64> {
    let dim = r.lambda.len();
    let m = antennas as f64;
    let mut c = DMatrix::from_diagonal(&r.lambda);
    for (n, b) in r.betas.iter().enumerate() {
        if n != l {
            c.ger(p[(k, n)] * q[(k, n)] * m, b, b, 1.0);
        }
    }
    debug_assert_eq!(c.nrows(), dim);
    c
}

/// Optimal combiner supported on Ω(l) (local coordinates) and its SINR.
#[allow(clippy::too_many_arguments)]
pub fn optimal_combiner_dec(
    beta: &LargeScaleFading,
    p: &UserGrid<f64>,
    q: &UserGrid<f64>,
    antennas: usize,
    omega: &[usize],
    lambda: &LambdaGrid,
    k: usize,
    l: usize,
) -> Result<(DVector<f64>, f64)> {
    let r = restrict(beta, omega, lambda, k);
    let b = &r.betas[l];
    let a = spd_solve(restricted_interference(&r, p, q, antennas, k, l), b)?;
    let sinr = p[(k, l)] * q[(k, l)] * antennas as f64 * b.dot(&a);
    Ok((a, sinr))
}

/// Decentralized optimal combiners of every user, padded to full length.
pub fn optimal_combiners_dec(
    kind: ReceiverKind,
    beta: &LargeScaleFading,
    p: &UserGrid<f64>,
    q: &UserGrid<f64>,
    antennas: usize,
    omegas: &[Vec<usize>],
) -> Result<LsfdCombiners> {
    let (cells, users) = (beta.num_cells(), beta.users_per_cell());
    let lam = lambda(kind, beta, p, q, antennas)?;
    let mut mats = Vec::with_capacity(users);
    for k in 0..users {
        let mut a = DMatrix::zeros(cells, cells);
        for (l, omega) in omegas.iter().enumerate() {
            let (local, _) = optimal_combiner_dec(beta, p, q, antennas, omega, &lam, k, l)?;
            a.set_column(l, &pad(&local, omega, cells));
        }
        mats.push(a);
    }
    Ok(LsfdCombiners::from_real(kind, mats))
}

/// E[s̃ s̃^H] and E[s̃ s*_kl] for the local first-stage estimates of user (k, l).
#[derive(Debug, Clone, PartialEq)]
pub struct SecondOrderStats {
    pub cov: CMatrix,
    pub cross: CVector,
    /// 0 for exact statistics.
    pub sample_count: usize,
}

/// Exact statistics under matched filtering:
/// cov = M² Σ_n D β^(l)_kn β^(l)T_kn p_kn q_kn D + M D Λ^(l) D, cross = M D β^(l)_kl √(p_kl q_kl).
#[allow(clippy::too_many_arguments)]
pub fn closed_form_stats(
    beta: &LargeScaleFading,
    p: &UserGrid<f64>,
    q: &UserGrid<f64>,
    antennas: usize,
    omega: &[usize],
    lambda: &LambdaGrid,
    k: usize,
    l: usize,
) -> Result<SecondOrderStats> {
    if lambda.kind() != ReceiverKind::MatchedFilter {
        return Err(Error::ClosedFormUnavailable);
    }
    let (cov, dir) = closed_form_parts(beta, p, q, antennas, omega, lambda, k, l);
    let cross = dir * libm::sqrt(p[(k, l)] * q[(k, l)]);
    Ok(SecondOrderStats { cov: cov.map(C64::from), cross: cross.map(C64::from), sample_count: 0 })
}

/// Covariance and cross-correlation direction M D β^(l)_kl, both real.
#[allow(clippy::too_many_arguments)]
fn closed_form_parts(
    beta: &LargeScaleFading,
    p: &UserGrid<f64>,
    q: &UserGrid<f64>,
    antennas: usize,
    omega: &[usize],
    lambda: &LambdaGrid,
    k: usize,
    l: usize,
) -> (DMatrix<f64>, DVector<f64>) {
    let r = restrict(beta, omega, lambda, k);
    let d = eta_diagonal(beta, p, omega, k);
    let m = antennas as f64;
    let mut cov = DMatrix::from_diagonal(&r.lambda.component_mul(&d).component_mul(&d)) * m;
    for (n, b) in r.betas.iter().enumerate() {
        let db = b.component_mul(&d);
        cov.ger(m * m * p[(k, n)] * q[(k, n)], &db, &db, 1.0);
    }
    let dir = r.betas[l].component_mul(&d) * m;
    (cov, dir)
}

/// Running sums for sample statistics of one user.
#[derive(Debug, Clone, PartialEq)]
pub struct StatsAccumulator {
    outer: CMatrix,
    cross: CVector,
    count: usize,
}

impl StatsAccumulator {
    pub fn new(dim: usize) -> Self {
        Self { outer: CMatrix::zeros(dim, dim), cross: CVector::zeros(dim), count: 0 }
    }

    pub fn push(&mut self, s_tilde: &CVector, s: C64) {
        self.outer.ger(C64::from(1.0), s_tilde, &s_tilde.map(|x| x.conj()), C64::from(1.0));
        self.cross.axpy(s.conj(), s_tilde, C64::from(1.0));
        self.count += 1;
    }

    pub fn merge(&mut self, other: &StatsAccumulator) {
        self.outer += &other.outer;
        self.cross += &other.cross;
        self.count += other.count;
    }

    /// Sample averages with the covariance symmetrized as (X + X^H)/2.
    pub fn finish(&self) -> SecondOrderStats {
        let n = C64::from(self.count.max(1) as f64);
        SecondOrderStats { cov: hermitian_part(&(&self.outer / n)), cross: &self.cross / n, sample_count: self.count }
    }
}

/// Sample statistics from pairs (s̃^(l), s_kl).
pub fn empirical_stats<I: IntoIterator<Item = (CVector, C64)>>(dim: usize, samples: I) -> SecondOrderStats {
    let mut acc = StatsAccumulator::new(dim);
    for (x, s) in samples {
        acc.push(&x, s);
    }
    acc.finish()
}

/// Simulates blocks `range` and accumulates the local statistics of every user.
/// Block `b` draws from stream `(seed, b)`.
#[allow(clippy::too_many_arguments)]
pub fn accumulate_stats(
    kind: ReceiverKind,
    beta: &LargeScaleFading,
    p: &UserGrid<f64>,
    q: &UserGrid<f64>,
    antennas: usize,
    omegas: &[Vec<usize>],
    seed: u64,
    range: core::ops::Range<u64>,
) -> Result<UserGrid<StatsAccumulator>> {
    let (cells, users) = (beta.num_cells(), beta.users_per_cell());
    let mut acc = UserGrid::from_fn(users, cells, |_, l| StatsAccumulator::new(omegas[l].len()));
    for b in range {
        let mut rng = stream(seed, b);
        let block = ChannelBlock::sample(cells, users, antennas, &mut rng);
        let symbols = SymbolGrid::sample(q, &mut rng);
        let out = first_stage_outputs(kind, beta, &block, p, &symbols)?;
        for k in 0..users {
            for l in 0..cells {
                let local = CVector::from_iterator(omegas[l].len(), omegas[l].iter().map(|&j| out[(k, j)]));
                acc[(k, l)].push(&local, symbols.s[(k, l)]);
            }
        }
    }
    Ok(acc)
}

/// a^MMSE = E[s̃ s̃^H]^{-1} E[s̃ s*]. Sample statistics get a ridge of
/// 1e-9 · trace / dim before the solve.
pub fn mmse_combiner(stats: &SecondOrderStats) -> Result<CVector> {
    let mut cov = stats.cov.clone();
    if stats.sample_count > 0 {
        let dim = cov.nrows();
        let delta = 1e-9 * cov.trace().re / dim as f64;
        for i in 0..dim {
            cov[(i, i)] += C64::from(delta);
        }
    }
    hpd_solve(cov, &stats.cross).map_err(|_| Error::SingularCovariance { samples: stats.sample_count })
}

/// Converts raw local weights into hatted coordinates.
pub fn hatted_from_raw(
    kind: ReceiverKind,
    a: &CVector,
    beta: &LargeScaleFading,
    p: &UserGrid<f64>,
    omega: &[usize],
    k: usize,
) -> CVector {
    CVector::from_iterator(
        omega.len(),
        omega.iter().zip(a.iter()).map(|(&j, a)| match kind {
            ReceiverKind::MatchedFilter => a * mmse_coefficient(beta, p, j, k, j),
            ReceiverKind::ZeroForcing => a / (beta.get(j, k, j) * libm::sqrt(p[(k, j)])),
        }),
    )
}

/// Decentralized optimal combining as an SINR model.
#[derive(Debug, Clone)]
pub struct DecentralizedOptimal<'a> {
    pub beta: &'a LargeScaleFading,
    pub p: &'a UserGrid<f64>,
    pub antennas: usize,
    pub kind: ReceiverKind,
    pub omegas: &'a [Vec<usize>],
}

impl SinrModel for DecentralizedOptimal<'_> {
    fn users(&self) -> usize {
        self.beta.users_per_cell()
    }
    fn cells(&self) -> usize {
        self.beta.num_cells()
    }
    fn gains(&self, q: &UserGrid<f64>) -> Result<UserGrid<f64>> {
        let lam = lambda(self.kind, self.beta, self.p, q, self.antennas)?;
        let m = self.antennas as f64;
        let mut gains = UserGrid::filled(self.users(), self.cells(), 0.0);
        for k in 0..self.users() {
            for l in 0..self.cells() {
                let r = restrict(self.beta, &self.omegas[l], &lam, k);
                let c = restricted_interference(&r, self.p, q, self.antennas, k, l);
                let a = spd_solve(c, &r.betas[l])?;
                gains[(k, l)] = self.p[(k, l)] * m * r.betas[l].dot(&a);
            }
        }
        Ok(gains)
    }
}

impl CombinerModel for DecentralizedOptimal<'_> {
    fn link(&self) -> Link<'_> {
        Link { beta: self.beta, p: self.p, antennas: self.antennas, kind: self.kind }
    }
    fn combiners(&self, q: &UserGrid<f64>) -> Result<LsfdCombiners> {
        optimal_combiners_dec(self.kind, self.beta, self.p, q, self.antennas, self.omegas)
    }
}

/// Decentralized MMSE combining from exact matched-filter statistics.
#[derive(Debug, Clone)]
pub struct DecentralizedMmse<'a> {
    beta: &'a LargeScaleFading,
    p: &'a UserGrid<f64>,
    antennas: usize,
    omegas: &'a [Vec<usize>],
}

impl<'a> DecentralizedMmse<'a> {
    /// Exact statistics are only available for the matched filter.
    pub fn new(
        kind: ReceiverKind,
        beta: &'a LargeScaleFading,
        p: &'a UserGrid<f64>,
        antennas: usize,
        omegas: &'a [Vec<usize>],
    ) -> Result<Self> {
        if kind != ReceiverKind::MatchedFilter {
            return Err(Error::ClosedFormUnavailable);
        }
        Ok(Self { beta, p, antennas, omegas })
    }
}

impl SinrModel for DecentralizedMmse<'_> {
    fn users(&self) -> usize {
        self.beta.users_per_cell()
    }
    fn cells(&self) -> usize {
        self.beta.num_cells()
    }
    fn gains(&self, q: &UserGrid<f64>) -> Result<UserGrid<f64>> {
        let c = self.combiners(q)?;
        c.gains(self.beta, self.p, q, self.antennas)
    }
}

impl CombinerModel for DecentralizedMmse<'_> {
    fn link(&self) -> Link<'_> {
        Link { beta: self.beta, p: self.p, antennas: self.antennas, kind: ReceiverKind::MatchedFilter }
    }
    fn combiners(&self, q: &UserGrid<f64>) -> Result<LsfdCombiners> {
        let (cells, users) = (self.cells(), self.users());
        let lam = lambda(ReceiverKind::MatchedFilter, self.beta, self.p, q, self.antennas)?;
        let mut mats = Vec::with_capacity(users);
        for k in 0..users {
            let mut a = CMatrix::zeros(cells, cells);
            for l in 0..cells {
                let omega = &self.omegas[l];
                // The cross term is M D β √(pq); dropping the scalar √(pq) keeps the
                // direction defined at q_kl = 0 without changing the SINR.
                let (cov, dir) = closed_form_parts(self.beta, self.p, q, self.antennas, omega, &lam, k, l);
                let stats = SecondOrderStats { cov: cov.map(C64::from), cross: dir.map(C64::from), sample_count: 0 };
                let raw = mmse_combiner(&stats)?;
                let hat = hatted_from_raw(ReceiverKind::MatchedFilter, &raw, self.beta, self.p, omega, k);
                a.set_column(l, &pad(&hat, omega, cells));
            }
            mats.push(a);
        }
        Ok(LsfdCombiners { kind: ReceiverKind::MatchedFilter, a_hat: mats })
    }
}

/// Decentralized MMSE combining from simulated statistics (`trials` blocks
/// per evaluation, stream family `seed`). Works for both receivers.
#[derive(Debug, Clone)]
pub struct EmpiricalMmse<'a> {
    pub beta: &'a LargeScaleFading,
    pub p: &'a UserGrid<f64>,
    pub antennas: usize,
    pub kind: ReceiverKind,
    pub omegas: &'a [Vec<usize>],
    pub trials: u64,
    pub seed: u64,
}

impl SinrModel for EmpiricalMmse<'_> {
    fn users(&self) -> usize {
        self.beta.users_per_cell()
    }
    fn cells(&self) -> usize {
        self.beta.num_cells()
    }
    /// Users with q_kl = 0 have no cross-correlation to learn from and get gain 0.
    fn gains(&self, q: &UserGrid<f64>) -> Result<UserGrid<f64>> {
        self.combiners(q)?.gains(self.beta, self.p, q, self.antennas)
    }
}

impl CombinerModel for EmpiricalMmse<'_> {
    fn link(&self) -> Link<'_> {
        Link { beta: self.beta, p: self.p, antennas: self.antennas, kind: self.kind }
    }
    fn combiners(&self, q: &UserGrid<f64>) -> Result<LsfdCombiners> {
        let (cells, users) = (self.cells(), self.users());
        let acc = accumulate_stats(self.kind, self.beta, self.p, q, self.antennas, self.omegas, self.seed, 0..self.trials)?;
        let mut mats = Vec::with_capacity(users);
        for k in 0..users {
            let mut a = CMatrix::zeros(cells, cells);
            for l in 0..cells {
                let omega = &self.omegas[l];
                let stats = acc[(k, l)].finish();
                let raw = mmse_combiner(&stats)?;
                let hat = hatted_from_raw(self.kind, &raw, self.beta, self.p, omega, k);
                a.set_column(l, &pad(&hat, omega, cells));
            }
            mats.push(a);
        }
        Ok(LsfdCombiners { kind: self.kind, a_hat: mats })
    }
}

/// SINR estimated over simulated blocks as |E[ŝ s*]|² / (E|ŝ|² − |E[ŝ s*]|²).
#[allow(clippy::too_many_arguments)]
pub fn empirical_sinr(
    link: Link<'_>,
    combiners: &LsfdCombiners,
    q: &UserGrid<f64>,
    blocks: u64,
    seed: u64,
) -> Result<UserGrid<f64>> {
    let (beta, p) = (link.beta, link.p);
    let (cells, users) = (beta.num_cells(), beta.users_per_cell());
    let weights = UserGrid::from_fn(users, cells, |k, l| {
        (0..cells).map(|j| raw_weight(link.kind, combiners.a_hat[k][(j, l)], beta, p, k, j).conj()).collect::<Vec<_>>()
    });
    let mut corr = UserGrid::filled(users, cells, C64::new(0.0, 0.0));
    let mut power = UserGrid::filled(users, cells, 0.0);
    for b in 0..blocks {
        let mut rng = stream(seed, b);
        let block = ChannelBlock::sample(cells, users, link.antennas, &mut rng);
        let symbols = SymbolGrid::sample(q, &mut rng);
        let out = first_stage_outputs(link.kind, beta, &block, p, &symbols)?;
        for k in 0..users {
            for l in 0..cells {
                let est: C64 = weights[(k, l)].iter().enumerate().map(|(j, w)| w * out[(k, j)]).sum();
                corr[(k, l)] += est * symbols.s[(k, l)].conj();
                power[(k, l)] += est.norm_sqr();
            }
        }
    }
    let n = blocks.max(1) as f64;
    Ok(UserGrid::from_fn(users, cells, |k, l| {
        let useful = (corr[(k, l)] / n).norm_sqr();
        let rest = power[(k, l)] / n - useful;
        if rest > 0.0 {
            useful / rest
        } else {
            f64::INFINITY
        }
    }))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SinrMode {
    /// Closed-form SINR of the current combiners.
    Analytic,
    /// SINR measured over `blocks` simulated coherence blocks.
    Empirical { blocks: u64, seed: u64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerControlOptions {
    /// Stop once every |SINR − γ| is below this.
    pub epsilon: f64,
    pub max_rounds: usize,
    pub mode: SinrMode,
    /// Stop once no power moves by more than this relative amount.
    pub settle_tolerance: f64,
}

impl PowerControlOptions {
    pub fn new(epsilon: f64, max_rounds: usize) -> Self {
        Self { epsilon, max_rounds, mode: SinrMode::Analytic, settle_tolerance: 1e-10 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PowerControlTrace {
    /// Powers at the start of every round, then the final powers.
    pub q_trace: Vec<UserGrid<f64>>,
    /// SINRs measured at the start of every round.
    pub sinr_trace: Vec<UserGrid<f64>>,
    /// Every user within ε of the target.
    pub target_met: bool,
    /// Powers stopped moving (possibly short of the target).
    pub settled: bool,
}

impl PowerControlTrace {
    pub fn converged(&self) -> bool {
        self.target_met || self.settled
    }

    pub fn final_q(&self) -> &UserGrid<f64> {
        self.q_trace.last().expect("trace holds the start point")
    }

    pub fn final_sinr(&self) -> &UserGrid<f64> {
        self.sinr_trace.last().expect("at least one round")
    }
}

/// Synchronous rounds of the per-user update towards a common target: every
/// round measures all SINRs at the current powers, then every user updates
/// from its own measurement. Starts at Q_max.
pub fn decentralized_power_control<M: CombinerModel + ?Sized>(
    model: &M,
    gamma: f64,
    q_max: f64,
    opts: &PowerControlOptions,
) -> Result<PowerControlTrace> {
    let (users, cells) = (model.users(), model.cells());
    let mut q = UserGrid::filled(users, cells, q_max);
    let mut trace = PowerControlTrace { q_trace: Vec::new(), sinr_trace: Vec::new(), target_met: false, settled: false };
    for round in 0..opts.max_rounds.max(1) {
        let sinr = match opts.mode {
            SinrMode::Analytic => model.sinr(&q)?,
            SinrMode::Empirical { blocks, seed } => {
                let comb = model.combiners(&q)?;
                empirical_sinr(model.link(), &comb, &q, blocks, seed.wrapping_add(round as u64))?
            }
        };
        trace.q_trace.push(q.clone());
        let met = sinr.as_slice().iter().all(|s| (s - gamma).abs() < opts.epsilon);
        let next = UserGrid::from_fn(users, cells, |k, l| distributed_power_update(q[(k, l)], sinr[(k, l)], gamma, q_max));
        trace.sinr_trace.push(sinr);
        if met {
            trace.target_met = true;
            return Ok(trace);
        }
        let gap = relative_gap(&next, &q);
        q = next;
        if gap <= opts.settle_tolerance {
            trace.settled = true;
            break;
        }
    }
    trace.q_trace.push(q);
    Ok(trace)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lsfd::{lambda_mf, optimal_combiner};
    use approx::assert_relative_eq;

    fn unit() -> (LargeScaleFading, UserGrid<f64>, UserGrid<f64>) {
        (LargeScaleFading::from_fn(1, 1, |_, _, _| 1.0), UserGrid::filled(1, 1, 1.0), UserGrid::filled(1, 1, 1.0))
    }

    fn three_cell() -> (LargeScaleFading, UserGrid<f64>, UserGrid<f64>) {
        let beta = LargeScaleFading::from_fn(3, 2, |j, k, l| if j == l { 10.0 + k as f64 } else { 1.0 + 0.5 * (j + 2 * l + k) as f64 });
        (beta, UserGrid::filled(2, 3, 1.0), UserGrid::from_fn(2, 3, |k, l| 0.5 + 0.25 * (k + l) as f64))
    }

    #[test]
    fn scalar_closed_form_stats() {
        let (beta, p, q) = unit();
        let lam = lambda_mf(&beta, &p, &q);
        let s = closed_form_stats(&beta, &p, &q, 100, &[0], &lam, 0, 0).unwrap();
        assert_relative_eq!(s.cov[(0, 0)].re, 2600.0, max_relative = 1e-14);
        assert_relative_eq!(s.cross[0].re, 50.0, max_relative = 1e-14);
        let a = mmse_combiner(&s).unwrap();
        assert_relative_eq!(a[0].re, 50.0 / 2600.0, max_relative = 1e-14);
    }

    #[test]
    fn zero_data_power_leaves_noise_and_pilot_terms() {
        let (beta, p, _) = three_cell();
        let q = UserGrid::filled(2, 3, 0.0);
        let lam = lambda_mf(&beta, &p, &q);
        let omega = [0, 2];
        let s = closed_form_stats(&beta, &p, &q, 20, &omega, &lam, 1, 0).unwrap();
        let d = eta_diagonal(&beta, &p, &omega, 1);
        for i in 0..2 {
            assert_relative_eq!(s.cov[(i, i)].re, 20.0 * d[i] * d[i] * lam.get(omega[i], 1), max_relative = 1e-14);
        }
        assert_eq!(s.cov[(0, 1)], C64::new(0.0, 0.0));
        assert!(s.cross.iter().all(|x| x.norm() == 0.0));
    }

    #[test]
    fn closed_form_requires_matched_filter() {
        let (beta, p, q) = unit();
        let lam = lambda(ReceiverKind::ZeroForcing, &beta, &p, &q, 4).unwrap();
        assert_eq!(closed_form_stats(&beta, &p, &q, 4, &[0], &lam, 0, 0), Err(Error::ClosedFormUnavailable));
        assert!(DecentralizedMmse::new(ReceiverKind::ZeroForcing, &beta, &p, 4, &[]).is_err());
    }

    #[test]
    fn full_neighbourhood_matches_global_optimum() {
        let (beta, p, q) = three_cell();
        let lam = lambda_mf(&beta, &p, &q);
        let all = [0, 1, 2];
        for k in 0..2 {
            for l in 0..3 {
                let (a_dec, s_dec) = optimal_combiner_dec(&beta, &p, &q, 30, &all, &lam, k, l).unwrap();
                let (a, s) = optimal_combiner(&beta, &p, &q, 30, &lam, k, l).unwrap();
                assert_relative_eq!(s_dec, s, max_relative = 1e-12);
                assert!((a_dec - a).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn single_cell_neighbourhood_is_scalar() {
        let (beta, p, q) = three_cell();
        let lam = lambda_mf(&beta, &p, &q);
        let m = 30.0;
        let (k, l) = (1, 2);
        let (_, s) = optimal_combiner_dec(&beta, &p, &q, 30, &[l], &lam, k, l).unwrap();
        let b = |n: usize| beta.get(l, k, n);
        let leak: f64 = (0..3).filter(|&n| n != l).map(|n| b(n) * b(n) * p[(k, n)] * q[(k, n)] * m).sum();
        let expect = p[(k, l)] * q[(k, l)] * m * b(l) * b(l) / (leak + lam.get(l, k));
        assert_relative_eq!(s, expect, max_relative = 1e-12);
    }

    #[test]
    fn padded_combiner_reproduces_restricted_sinr() {
        let (beta, p, q) = three_cell();
        let lam = lambda_mf(&beta, &p, &q);
        let omega = [1, 2];
        let (a, s) = optimal_combiner_dec(&beta, &p, &q, 30, &omega, &lam, 0, 1).unwrap();
        let full = pad(&a, &omega, 3);
        let direct = crate::lsfd::sinr_with_lambda(full.as_slice(), &beta, &p, &q, 30, &lam, 0, 1);
        assert_relative_eq!(direct, s, max_relative = 1e-10);
    }

    #[test]
    fn accumulator_symmetrizes_and_counts() {
        let x = CVector::from_vec(alloc::vec![C64::new(1.0, 2.0), C64::new(-0.5, 0.0)]);
        let s = empirical_stats(2, [(x.clone(), C64::new(0.0, 1.0))]);
        assert_eq!(s.sample_count, 1);
        assert_eq!(s.cov, s.cov.adjoint());
        assert_eq!(s.cross[0], C64::new(1.0, 2.0) * C64::new(0.0, -1.0));
    }

    #[test]
    fn scalar_power_control_reaches_target() {
        let (beta, p, _) = unit();
        let model = DecentralizedOptimal { beta: &beta, p: &p, antennas: 100, kind: ReceiverKind::MatchedFilter, omegas: &[alloc::vec![0]] };
        let t = decentralized_power_control(&model, 10.0, 1.0, &PowerControlOptions::new(1e-6, 100)).unwrap();
        assert!(t.target_met);
        assert!((t.final_q()[(0, 0)] - 0.25).abs() < 1e-4);
        let missed = decentralized_power_control(&model, 26.0, 1.0, &PowerControlOptions::new(1e-6, 200)).unwrap();
        assert!(missed.settled && !missed.target_met);
        assert!(missed.final_sinr()[(0, 0)] < 26.0);
    }
}
