//! Closed-form SINRs of two-stage decoding and the second-stage combiners.
//!
//! Combiners are kept in hatted coordinates: for the matched filter
//! â_klj = η_kj · a_klj, for zero-forcing â_klj = a_klj / (β_jkj √p_kj). In these
//! coordinates both receivers share one SINR expression,
//!
//! ```text
//!                 p_kl q_kl M |Σ_j â*_klj β_jkl|²
//! SINR_kl = ──────────────────────────────────────────────────────────
//!           M Σ_{n≠l} p_kn q_kn |Σ_j â*_klj β_jkn|²  +  Σ_j |â_klj|² λ_jk
//! ```
//!
//! and differ only in λ.

use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};

use crate::channel::{error_variance, pilot_load, LargeScaleFading};
use crate::error::{Error, Result};
use crate::grid::UserGrid;
use crate::linalg::{condition_number, inverse_quadratic_form, spd_solve};
use crate::receivers::ReceiverKind;
use crate::{CMatrix, C64};

/// Above this condition number the fading matrix of a pilot index is treated as singular.
pub const MAX_FADING_CONDITION: f64 = 1e13;

/// Scalar coefficient of a combiner, real or complex.
pub trait Coefficient: Copy {
    /// conj(self) · b
    fn conj_scale(self, b: f64) -> C64;
    fn norm_sqr(self) -> f64;
}

impl Coefficient for f64 {
    #[inline]
    fn conj_scale(self, b: f64) -> C64 {
        C64::new(self * b, 0.0)
    }
    #[inline]
    fn norm_sqr(self) -> f64 {
        self * self
    }
}

impl Coefficient for C64 {
    #[inline]
    fn conj_scale(self, b: f64) -> C64 {
        self.conj() * b
    }
    #[inline]
    fn norm_sqr(self) -> f64 {
        nalgebra::Complex::norm_sqr(&self)
    }
}

/// λ_jk for every BS j and pilot index k.
#[derive(Debug, Clone, PartialEq)]
pub struct LambdaGrid {
    kind: ReceiverKind,
    users: usize,
    data: Vec<f64>,
}

impl LambdaGrid {
    pub fn kind(&self) -> ReceiverKind {
        self.kind
    }

    #[inline]
    pub fn get(&self, j: usize, k: usize) -> f64 {
        self.data[j * self.users + k]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }
}

/// λ_jk = (1 + Σ_i β_jki p_ki)(1 + Σ_n Σ_m β_jmn q_mn).
pub fn lambda_mf(beta: &LargeScaleFading, p: &UserGrid<f64>, q: &UserGrid<f64>) -> LambdaGrid {
    let (cells, users) = (beta.num_cells(), beta.users_per_cell());
    let mut data = Vec::with_capacity(cells * users);
    for j in 0..cells {
        let load = 1.0 + sum_over_users(cells, users, |m, n| beta.get(j, m, n) * q[(m, n)]);
        for k in 0..users {
            data.push(pilot_load(beta, p, j, k) * load);
        }
    }
    LambdaGrid { kind: ReceiverKind::MatchedFilter, users, data }
}

/// λ_jk = M/(M−K) (1 + Σ_i β_jki p_ki)(1 + Σ_n Σ_m [β_jmn − β²_jmn p_mn/(1 + Σ_i β_jmi p_mi)] q_mn).
pub fn lambda_zf(beta: &LargeScaleFading, p: &UserGrid<f64>, q: &UserGrid<f64>, antennas: usize) -> Result<LambdaGrid> {
    let (cells, users) = (beta.num_cells(), beta.users_per_cell());
    if antennas <= users {
        return Err(Error::TooFewAntennas { antennas, users });
    }
    let scale = antennas as f64 / (antennas - users) as f64;
    let mut data = Vec::with_capacity(cells * users);
    for j in 0..cells {
        let load = 1.0 + sum_over_users(cells, users, |m, n| error_variance(beta, p, j, m, n) * q[(m, n)]);
        for k in 0..users {
            data.push(scale * pilot_load(beta, p, j, k) * load);
        }
    }
    Ok(LambdaGrid { kind: ReceiverKind::ZeroForcing, users, data })
}

pub fn lambda(kind: ReceiverKind, beta: &LargeScaleFading, p: &UserGrid<f64>, q: &UserGrid<f64>, antennas: usize) -> Result<LambdaGrid> {
    match kind {
        ReceiverKind::MatchedFilter => Ok(lambda_mf(beta, p, q)),
        ReceiverKind::ZeroForcing => lambda_zf(beta, p, q, antennas),
    }
}

fn sum_over_users(cells: usize, users: usize, mut f: impl FnMut(usize, usize) -> f64) -> f64 {
    let mut s = 0.0;
    for n in 0..cells {
        for m in 0..users {
            s += f(m, n);
        }
    }
    s
}

/// Powers of the three parts of the second-stage estimate of user (k, l), on
/// the receiver's natural scale (M² for the matched filter, 1 for zero-forcing).
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct TermPowers {
    pub useful: f64,
    /// Coherent leakage from same-pilot users of other cells.
    pub pilot: f64,
    /// Everything else: estimation error, other pilots, noise.
    pub other: f64,
}

impl TermPowers {
    pub fn sinr(&self) -> f64 {
        let denom = self.pilot + self.other;
        if denom > 0.0 {
            self.useful / denom
        } else {
            0.0
        }
    }
}

/// Σ_j conj(â_j) β_jkn.
#[inline]
pub fn projected_gain<T: Coefficient>(a_hat: &[T], beta: &LargeScaleFading, k: usize, n: usize) -> C64 {
    a_hat.iter().enumerate().map(|(j, a)| a.conj_scale(beta.get(j, k, n))).sum()
}

/// Closed-form term powers for the combiner column `a_hat` (length L) of user (k, l).
#[allow(clippy::too_many_arguments)]
pub fn term_powers<T: Coefficient>(
    a_hat: &[T],
    beta: &LargeScaleFading,
    p: &UserGrid<f64>,
    q: &UserGrid<f64>,
    antennas: usize,
    lambda: &LambdaGrid,
    k: usize,
    l: usize,
) -> TermPowers {
    let m = antennas as f64;
    let cells = beta.num_cells();
    let coherent = |n: usize| p[(k, n)] * q[(k, n)] * projected_gain(a_hat, beta, k, n).norm_sqr();
    let pilot: f64 = (0..cells).filter(|&n| n != l).map(coherent).sum();
    let spread: f64 = a_hat.iter().enumerate().map(|(j, a)| a.norm_sqr() * lambda.get(j, k)).sum();
    let (s_coh, s_spread) = match lambda.kind() {
        ReceiverKind::MatchedFilter => (m * m, m),
        ReceiverKind::ZeroForcing => (1.0, 1.0 / m),
    };
    TermPowers { useful: s_coh * coherent(l), pilot: s_coh * pilot, other: s_spread * spread }
}

/// SINR of user (k, l) under the hatted combiner `a_hat`; 0 when every power is zero.
#[allow(clippy::too_many_arguments)]
pub fn sinr_with_lambda<T: Coefficient>(
    a_hat: &[T],
    beta: &LargeScaleFading,
    p: &UserGrid<f64>,
    q: &UserGrid<f64>,
    antennas: usize,
    lambda: &LambdaGrid,
    k: usize,
    l: usize,
) -> f64 {
    q[(k, l)] * gain_with_lambda(a_hat, beta, p, q, antennas, lambda, k, l)
}

/// SINR_kl / q_kl, finite at q_kl = 0.
#[allow(clippy::too_many_arguments)]
pub fn gain_with_lambda<T: Coefficient>(
    a_hat: &[T],
    beta: &LargeScaleFading,
    p: &UserGrid<f64>,
    q: &UserGrid<f64>,
    antennas: usize,
    lambda: &LambdaGrid,
    k: usize,
    l: usize,
) -> f64 {
    let m = antennas as f64;
    let cells = beta.num_cells();
    let mut denom: f64 = a_hat.iter().enumerate().map(|(j, a)| a.norm_sqr() * lambda.get(j, k)).sum();
    for n in (0..cells).filter(|&n| n != l) {
        denom += m * p[(k, n)] * q[(k, n)] * projected_gain(a_hat, beta, k, n).norm_sqr();
    }
    if denom > 0.0 {
        p[(k, l)] * m * projected_gain(a_hat, beta, k, l).norm_sqr() / denom
    } else {
        0.0
    }
}

/// SINR with a matched-filter first stage.
pub fn sinr_mf<T: Coefficient>(a_hat: &[T], beta: &LargeScaleFading, p: &UserGrid<f64>, q: &UserGrid<f64>, antennas: usize, k: usize, l: usize) -> f64 {
    sinr_with_lambda(a_hat, beta, p, q, antennas, &lambda_mf(beta, p, q), k, l)
}

/// SINR with a zero-forcing first stage.
#[allow(clippy::too_many_arguments)]
pub fn sinr_zf<T: Coefficient>(a_hat: &[T], beta: &LargeScaleFading, p: &UserGrid<f64>, q: &UserGrid<f64>, antennas: usize, k: usize, l: usize) -> Result<f64> {
    Ok(sinr_with_lambda(a_hat, beta, p, q, antennas, &lambda_zf(beta, p, q, antennas)?, k, l))
}

/// Σ_{n≠l} β_kn β_kn^T p_kn q_kn M + Λ_k.
#[allow(clippy::too_many_arguments)]
pub fn interference_matrix(
    beta: &LargeScaleFading,
    p: &UserGrid<f64>,
    q: &UserGrid<f64>,
    antennas: usize,
    lambda: &LambdaGrid,
    k: usize,
    l: usize,
) -> DMatrix<f64> {
    let cells = beta.num_cells();
    let m = antennas as f64;
    let mut c = DMatrix::from_fn(cells, cells, |i, j| if i == j { lambda.get(j, k) } else { 0.0 });
    for n in (0..cells).filter(|&n| n != l) {
        let b = beta.column(k, n);
        c.ger(p[(k, n)] * q[(k, n)] * m, &b, &b, 1.0);
    }
    c
}

/// Optimal hatted combiner of user (k, l) and the SINR it achieves.
pub fn optimal_combiner(
    beta: &LargeScaleFading,
    p: &UserGrid<f64>,
    q: &UserGrid<f64>,
    antennas: usize,
    lambda: &LambdaGrid,
    k: usize,
    l: usize,
) -> Result<(DVector<f64>, f64)> {
    let b = beta.column(k, l);
    let a = spd_solve(interference_matrix(beta, p, q, antennas, lambda, k, l), &b)?;
    let sinr = p[(k, l)] * q[(k, l)] * antennas as f64 * b.dot(&a);
    Ok((a, sinr))
}

/// SINR_kl / q_kl under optimal combining for every user.
///
/// One Cholesky factorization per pilot index: with C = Σ_n β_kn β_kn^T c_n + Λ_k
/// and u = β_kl^T C^{-1} β_kl, removing the own term gives β^T C_kl^{-1} β = u / (1 − c_l u).
pub fn optimal_gains(
    beta: &LargeScaleFading,
    p: &UserGrid<f64>,
    q: &UserGrid<f64>,
    antennas: usize,
    lambda: &LambdaGrid,
) -> Result<UserGrid<f64>> {
    let (cells, users) = (beta.num_cells(), beta.users_per_cell());
    let m = antennas as f64;
    let mut gains = UserGrid::filled(users, cells, 0.0);
    for k in 0..users {
        let mut c = DMatrix::from_fn(cells, cells, |i, j| if i == j { lambda.get(j, k) } else { 0.0 });
        let columns: Vec<DVector<f64>> = (0..cells).map(|n| beta.column(k, n)).collect();
        for (n, b) in columns.iter().enumerate() {
            c.ger(p[(k, n)] * q[(k, n)] * m, b, b, 1.0);
        }
        let chol = c.cholesky().ok_or(Error::NotPositiveDefinite)?;
        for (l, b) in columns.iter().enumerate() {
            let u = inverse_quadratic_form(&chol, b);
            let own = p[(k, l)] * q[(k, l)] * m;
            gains[(k, l)] = p[(k, l)] * m * u / (1.0 - own * u);
        }
    }
    Ok(gains)
}

/// Combiners for every user, kept as one L×L matrix per pilot index with
/// column l holding â_kl.
#[derive(Debug, Clone, PartialEq)]
pub struct LsfdCombiners {
    pub kind: ReceiverKind,
    pub a_hat: Vec<CMatrix>,
}

impl LsfdCombiners {
    pub fn from_real(kind: ReceiverKind, a_hat: Vec<DMatrix<f64>>) -> Self {
        Self { kind, a_hat: a_hat.into_iter().map(|a| a.map(C64::from)).collect() }
    }

    /// â_kl = e_l: every user decoded by its own BS alone.
    pub fn single_cell(kind: ReceiverKind, cells: usize, users: usize) -> Self {
        Self { kind, a_hat: (0..users).map(|_| CMatrix::identity(cells, cells)).collect() }
    }

    pub fn column(&self, k: usize, l: usize) -> Vec<C64> {
        self.a_hat[k].column(l).iter().copied().collect()
    }

    pub fn sinr(&self, beta: &LargeScaleFading, p: &UserGrid<f64>, q: &UserGrid<f64>, antennas: usize) -> Result<SinrGrid> {
        let lam = lambda(self.kind, beta, p, q, antennas)?;
        Ok(SinrGrid::from_sinr(UserGrid::from_fn(beta.users_per_cell(), beta.num_cells(), |k, l| {
            sinr_with_lambda(self.a_hat[k].column(l).as_slice(), beta, p, q, antennas, &lam, k, l)
        })))
    }

    pub fn gains(&self, beta: &LargeScaleFading, p: &UserGrid<f64>, q: &UserGrid<f64>, antennas: usize) -> Result<UserGrid<f64>> {
        let lam = lambda(self.kind, beta, p, q, antennas)?;
        Ok(UserGrid::from_fn(beta.users_per_cell(), beta.num_cells(), |k, l| {
            gain_with_lambda(self.a_hat[k].column(l).as_slice(), beta, p, q, antennas, &lam, k, l)
        }))
    }
}

/// Optimal combiners for every user and their SINRs.
pub fn optimal_combiners(
    kind: ReceiverKind,
    beta: &LargeScaleFading,
    p: &UserGrid<f64>,
    q: &UserGrid<f64>,
    antennas: usize,
) -> Result<(LsfdCombiners, SinrGrid)> {
    let (cells, users) = (beta.num_cells(), beta.users_per_cell());
    let lam = lambda(kind, beta, p, q, antennas)?;
    let mut sinr = UserGrid::filled(users, cells, 0.0);
    let mut mats = Vec::with_capacity(users);
    for k in 0..users {
        let mut a = DMatrix::zeros(cells, cells);
        for l in 0..cells {
            let (col, s) = optimal_combiner(beta, p, q, antennas, &lam, k, l)?;
            a.set_column(l, &col);
            sinr[(k, l)] = s;
        }
        mats.push(a);
    }
    Ok((LsfdCombiners::from_real(kind, mats), SinrGrid::from_sinr(sinr)))
}

/// B_k with entries B_jn = β_jkn.
pub fn fading_matrix(beta: &LargeScaleFading, k: usize) -> DMatrix<f64> {
    let cells = beta.num_cells();
    DMatrix::from_fn(cells, cells, |j, n| beta.get(j, k, n))
}

/// Zero-forcing combiners for pilot index `k`: Â_k = B_k^{-T}, so that
/// Σ_j â_klj β_jkn = δ_ln and same-pilot leakage vanishes.
pub fn zf_lsfd_combiners(beta: &LargeScaleFading, k: usize) -> Result<DMatrix<f64>> {
    let b = fading_matrix(beta, k);
    let condition = condition_number(&b);
    if !(condition < MAX_FADING_CONDITION) {
        return Err(Error::SingularFadingMatrix { user: k, condition });
    }
    let inv = b.try_inverse().ok_or(Error::SingularFadingMatrix { user: k, condition })?;
    Ok(inv.transpose())
}

pub fn zf_lsfd_all(kind: ReceiverKind, beta: &LargeScaleFading) -> Result<LsfdCombiners> {
    let mats = (0..beta.users_per_cell()).map(|k| zf_lsfd_combiners(beta, k)).collect::<Result<Vec<_>>>()?;
    Ok(LsfdCombiners::from_real(kind, mats))
}

/// Single-cell matched-filter SINR as M → ∞ with p = q:
/// q_kj β²_jkj / Σ_{l≠j} q_kl β²_jkl.
pub fn sinr_limit_infinite_m(beta: &LargeScaleFading, q: &UserGrid<f64>, k: usize, j: usize) -> f64 {
    let own = q[(k, j)] * beta.get(j, k, j).powi(2);
    let leak: f64 = (0..beta.num_cells()).filter(|&l| l != j).map(|l| q[(k, l)] * beta.get(j, k, l).powi(2)).sum();
    if leak > 0.0 {
        own / leak
    } else {
        f64::INFINITY
    }
}

/// log2(1 + SINR), bits/s/Hz.
pub fn rate_from_sinr(sinr: f64) -> f64 {
    libm::log2(1.0 + sinr)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SinrGrid {
    pub sinr: UserGrid<f64>,
    pub rate: UserGrid<f64>,
}

impl SinrGrid {
    pub fn from_sinr(sinr: UserGrid<f64>) -> Self {
        let rate = sinr.map(|s| rate_from_sinr(*s));
        Self { sinr, rate }
    }
}
