//! Large-scale fading, small-scale fading blocks, pilot observations and MMSE
//! channel estimation.
//!
//! Gains are stored already divided by the receiver noise power, so a transmit
//! power in mW multiplied by a gain is a signal-to-noise ratio and every noise
//! term downstream has unit variance.

use alloc::vec::Vec;

use nalgebra::DVector;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::config::NetworkConfig;
use crate::error::{Error, Result};
use crate::grid::UserGrid;
use crate::rng::complex_normal;
use crate::topology::{Topology, UserDrop};
use crate::{CVector, C64};

/// Pathloss intercept at 1 km, dB.
pub const PATHLOSS_AT_1KM_DB: f64 = -127.8;
/// Pathloss exponent times ten.
pub const PATHLOSS_SLOPE_DB: f64 = 35.0;

/// Pathloss and shadowing in dB for a link of `d` km.
pub fn pathloss_db(d: f64, shadow_db: f64) -> Result<f64> {
    if !(d > 0.0) {
        return Err(Error::NonPositiveDistance(d));
    }
    Ok(PATHLOSS_AT_1KM_DB - PATHLOSS_SLOPE_DB * libm::log10(d) + shadow_db)
}

/// Linear gain normalized by the noise power. Pass `noise_power_dbm = 0` for
/// the raw gain.
pub fn pathloss_linear(d: f64, shadow_db: f64, noise_power_dbm: f64) -> Result<f64> {
    Ok(libm::pow(10.0, (pathloss_db(d, shadow_db)? - noise_power_dbm) / 10.0))
}

/// β_jkl: gain between BS `j` and user `k` of cell `l`.
#[derive(Debug, Clone, PartialEq)]
pub struct LargeScaleFading {
    cells: usize,
    users: usize,
    data: Vec<f64>,
}

impl LargeScaleFading {
    pub fn from_fn(cells: usize, users: usize, mut f: impl FnMut(usize, usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(cells * users * cells);
        for j in 0..cells {
            for k in 0..users {
                for l in 0..cells {
                    data.push(f(j, k, l));
                }
            }
        }
        Self { cells, users, data }
    }

    pub fn num_cells(&self) -> usize {
        self.cells
    }

    pub fn users_per_cell(&self) -> usize {
        self.users
    }

    #[inline]
    pub fn get(&self, j: usize, k: usize, l: usize) -> f64 {
        self.data[(j * self.users + k) * self.cells + l]
    }

    #[inline]
    pub fn set(&mut self, j: usize, k: usize, l: usize, value: f64) {
        self.data[(j * self.users + k) * self.cells + l] = value;
    }

    /// The vector β_kl = (β_1kl, …, β_Lkl) over all BSs.
    pub fn column(&self, k: usize, l: usize) -> DVector<f64> {
        DVector::from_fn(self.cells, |j, _| self.get(j, k, l))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn all_positive_finite(&self) -> bool {
        self.data.iter().all(|b| *b > 0.0 && b.is_finite())
    }
}

/// Draws shadowing independently for every (BS, user) pair and evaluates the
/// pathloss model at wrapped distances.
pub fn sample_large_scale<R: Rng + ?Sized>(
    topo: &Topology,
    drop: &UserDrop,
    cfg: &NetworkConfig,
    rng: &mut R,
) -> Result<LargeScaleFading> {
    let cells = topo.num_cells();
    let users = drop.positions().users();
    let mut beta = LargeScaleFading::from_fn(cells, users, |_, _, _| 0.0);
    for j in 0..cells {
        for k in 0..users {
            for l in 0..cells {
                let z: f64 = StandardNormal.sample(rng);
                let d = topo.distance_to_bs(j, drop.position(k, l));
                beta.set(j, k, l, pathloss_linear(d, cfg.shadow_std_db * z, cfg.noise_power_dbm)?);
            }
        }
    }
    Ok(beta)
}

/// 1 + Σ_i β_jki p_ki: received pilot power (plus noise) at BS `j` on pilot `k`.
#[inline]
pub fn pilot_load(beta: &LargeScaleFading, p: &UserGrid<f64>, j: usize, k: usize) -> f64 {
    1.0 + (0..beta.num_cells()).map(|i| beta.get(j, k, i) * p[(k, i)]).sum::<f64>()
}

/// η_kl, the MMSE scaling of the pilot observation of user (k, l) at its own BS.
pub fn eta(beta: &LargeScaleFading, p: &UserGrid<f64>, k: usize, l: usize) -> f64 {
    mmse_coefficient(beta, p, l, k, l)
}

/// MMSE coefficient of ĝ_jkl = c · r_kj.
#[inline]
pub fn mmse_coefficient(beta: &LargeScaleFading, p: &UserGrid<f64>, j: usize, k: usize, l: usize) -> f64 {
    beta.get(j, k, l) * libm::sqrt(p[(k, l)]) / pilot_load(beta, p, j, k)
}

/// Per-entry variance of ĝ_jkl.
pub fn estimate_variance(beta: &LargeScaleFading, p: &UserGrid<f64>, j: usize, k: usize, l: usize) -> f64 {
    let b = beta.get(j, k, l);
    b * b * p[(k, l)] / pilot_load(beta, p, j, k)
}

/// Per-entry variance of the estimation error g_jkl − ĝ_jkl.
pub fn error_variance(beta: &LargeScaleFading, p: &UserGrid<f64>, j: usize, k: usize, l: usize) -> f64 {
    beta.get(j, k, l) - estimate_variance(beta, p, j, k, l)
}

/// Small-scale fading and noise for one coherence block.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelBlock {
    cells: usize,
    users: usize,
    /// h_jkl, indexed like [`LargeScaleFading`].
    h: Vec<CVector>,
    /// Pilot noise at BS j after correlating with pilot k, indexed j·K + k.
    pilot_noise: Vec<CVector>,
    /// Receiver noise at BS j during the data symbol.
    data_noise: Vec<CVector>,
}

impl ChannelBlock {
    pub fn sample<R: Rng + ?Sized>(cells: usize, users: usize, antennas: usize, rng: &mut R) -> Self {
        let mut draw = |n: usize| -> Vec<CVector> {
            (0..n).map(|_| DVector::from_fn(antennas, |_, _| complex_normal(rng))).collect()
        };
        let h = draw(cells * users * cells);
        let pilot_noise = draw(cells * users);
        let data_noise = draw(cells);
        Self { cells, users, h, pilot_noise, data_noise }
    }

    /// Same fading, all noise set to zero.
    pub fn without_noise(mut self) -> Self {
        for z in self.pilot_noise.iter_mut().chain(self.data_noise.iter_mut()) {
            z.fill(C64::new(0.0, 0.0));
        }
        self
    }

    pub fn antennas(&self) -> usize {
        self.data_noise.first().map_or(0, |z| z.len())
    }

    pub fn num_cells(&self) -> usize {
        self.cells
    }

    pub fn users_per_cell(&self) -> usize {
        self.users
    }

    #[inline]
    pub fn h(&self, j: usize, k: usize, l: usize) -> &CVector {
        &self.h[(j * self.users + k) * self.cells + l]
    }

    /// g_jkl = √β_jkl · h_jkl.
    pub fn g(&self, beta: &LargeScaleFading, j: usize, k: usize, l: usize) -> CVector {
        self.h(j, k, l) * C64::from(libm::sqrt(beta.get(j, k, l)))
    }

    pub fn pilot_noise(&self, j: usize, k: usize) -> &CVector {
        &self.pilot_noise[j * self.users + k]
    }

    pub fn data_noise(&self, j: usize) -> &CVector {
        &self.data_noise[j]
    }
}

/// r_kl at BS `l`: Σ_n g_lkn √p_kn + z̄_lk.
pub fn pilot_observation(
    beta: &LargeScaleFading,
    block: &ChannelBlock,
    p: &UserGrid<f64>,
    k: usize,
    l: usize,
) -> CVector {
    let mut r = block.pilot_noise(l, k).clone();
    for n in 0..beta.num_cells() {
        let w = libm::sqrt(beta.get(l, k, n) * p[(k, n)]);
        if w != 0.0 {
            r.axpy(C64::from(w), block.h(l, k, n), C64::from(1.0));
        }
    }
    r
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChannelEstimate {
    pub g_hat: CVector,
    /// The scalar c in ĝ = c · r.
    pub coefficient: f64,
    pub est_var: f64,
    pub err_var: f64,
}

/// MMSE estimate of g_lkl from the pilot observation `r` at BS `l`.
pub fn mmse_estimate(
    r: &CVector,
    beta: &LargeScaleFading,
    p: &UserGrid<f64>,
    k: usize,
    l: usize,
) -> ChannelEstimate {
    let coefficient = eta(beta, p, k, l);
    let est_var = estimate_variance(beta, p, l, k, l);
    ChannelEstimate {
        g_hat: r * C64::from(coefficient),
        coefficient,
        est_var,
        err_var: beta.get(l, k, l) - est_var,
    }
}

/// ĝ_lkm recovered from ĝ_lkl: both are scalings of the same observation.
/// Returns `None` when p_kl = 0 (the own estimate is then identically zero).
pub fn cross_cell_estimate(
    own: &ChannelEstimate,
    beta: &LargeScaleFading,
    p: &UserGrid<f64>,
    k: usize,
    l: usize,
    m: usize,
) -> Option<CVector> {
    let denom = beta.get(l, k, l) * libm::sqrt(p[(k, l)]);
    if denom == 0.0 {
        return None;
    }
    let ratio = beta.get(l, k, m) * libm::sqrt(p[(k, m)]) / denom;
    Some(&own.g_hat * C64::from(ratio))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;
    use approx::assert_relative_eq;

    fn unit_beta(cells: usize, users: usize) -> LargeScaleFading {
        LargeScaleFading::from_fn(cells, users, |_, _, _| 1.0)
    }

    #[test]
    fn pathloss_reference_points() {
        assert_relative_eq!(pathloss_linear(1.0, 0.0, 0.0).unwrap(), 10f64.powf(-12.78), max_relative = 1e-12);
        assert_relative_eq!(pathloss_linear(0.1, 0.0, 0.0).unwrap(), 10f64.powf(-9.28), max_relative = 1e-12);
        let a = pathloss_linear(0.7, 0.0, -92.0).unwrap();
        let b = pathloss_linear(0.7, 10.0, -92.0).unwrap();
        assert_relative_eq!(b / a, 10.0, max_relative = 1e-12);
        assert_eq!(pathloss_linear(0.0, 0.0, 0.0), Err(Error::NonPositiveDistance(0.0)));
    }

    #[test]
    fn scalar_mmse_estimate() {
        let beta = unit_beta(1, 1);
        let p = UserGrid::filled(1, 1, 1.0);
        let r = DVector::from_element(3, C64::new(2.0, 0.0));
        let est = mmse_estimate(&r, &beta, &p, 0, 0);
        assert_eq!(est.coefficient, 0.5);
        assert_eq!(est.est_var, 0.5);
        assert_eq!(est.err_var, 0.5);
        assert_eq!(est.g_hat[0], C64::new(1.0, 0.0));
        assert_eq!(eta(&beta, &p, 0, 0), est.coefficient);
    }

    #[test]
    fn zero_pilot_power_gives_zero_estimate() {
        let beta = unit_beta(2, 1);
        let p = UserGrid::from_fn(1, 2, |_, l| if l == 0 { 0.0 } else { 3.0 });
        let block = ChannelBlock::sample(2, 1, 4, &mut stream(1, 0));
        let r = pilot_observation(&beta, &block, &p, 0, 0);
        let est = mmse_estimate(&r, &beta, &p, 0, 0);
        assert!(est.g_hat.iter().all(|x| *x == C64::new(0.0, 0.0)));
        assert_eq!(est.est_var, 0.0);
        assert_eq!(est.err_var, 1.0);
        assert!(cross_cell_estimate(&est, &beta, &p, 0, 0, 1).is_none());
    }

    #[test]
    fn zero_power_observation_is_pilot_noise() {
        let beta = unit_beta(2, 2);
        let p = UserGrid::filled(2, 2, 0.0);
        let block = ChannelBlock::sample(2, 2, 5, &mut stream(2, 0));
        assert_eq!(&pilot_observation(&beta, &block, &p, 1, 0), block.pilot_noise(0, 1));
    }

    #[test]
    fn cross_cell_estimates_are_collinear() {
        let beta = LargeScaleFading::from_fn(3, 2, |j, k, l| 0.5 + (j + 2 * k + 3 * l) as f64);
        let p = UserGrid::from_fn(2, 3, |k, l| 1.0 + (k + l) as f64);
        let block = ChannelBlock::sample(3, 2, 6, &mut stream(3, 0));
        let (k, l, m) = (1, 2, 0);
        let own = mmse_estimate(&pilot_observation(&beta, &block, &p, k, l), &beta, &p, k, l);
        let other = pilot_observation(&beta, &block, &p, k, l) * C64::from(mmse_coefficient(&beta, &p, l, k, m));
        let via_ratio = cross_cell_estimate(&own, &beta, &p, k, l, m).unwrap();
        assert!((other - via_ratio).norm() < 1e-12);
    }

    #[test]
    fn noiseless_block_keeps_fading() {
        let block = ChannelBlock::sample(1, 1, 3, &mut stream(4, 0));
        let h = block.h(0, 0, 0).clone();
        let quiet = block.without_noise();
        assert_eq!(quiet.h(0, 0, 0), &h);
        assert!(quiet.data_noise(0).iter().all(|z| z.norm() == 0.0));
    }

    #[test]
    fn decomposition_is_exact() {
        let beta = LargeScaleFading::from_fn(3, 2, |j, k, l| 1e-2 * (1 + j * 7 + k * 3 + l) as f64);
        let p = UserGrid::filled(2, 3, 200.0);
        for j in 0..3 {
            for k in 0..2 {
                for l in 0..3 {
                    let e = estimate_variance(&beta, &p, j, k, l);
                    assert!(e >= 0.0 && e <= beta.get(j, k, l));
                    assert_relative_eq!(e + error_variance(&beta, &p, j, k, l), beta.get(j, k, l), max_relative = 1e-15);
                }
            }
        }
    }
}
