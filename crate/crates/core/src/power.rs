//! Max-min data power control.
//!
//! Every scheme exposes its SINRs through [`SinrModel`]. Writing
//! SINR_kl = q_kl · G_kl(q), the interference function is I_kl(q) = 1 / G_kl(q),
//! which stays finite at q_kl = 0. A target γ is feasible under the power cap
//! when the fixed point of q ← γ I(q) lies below Q_max; the max-min target is
//! found by bisection on γ.

use alloc::vec::Vec;

use crate::channel::LargeScaleFading;
use crate::error::Result;
use crate::grid::UserGrid;
use crate::lsfd::{lambda, optimal_combiners, optimal_gains, LsfdCombiners};
use crate::receivers::ReceiverKind;

/// Relative slack when reading an SINR as meeting its target. Guards the
/// certificate against rounding when the target sits exactly on the optimum.
pub const CERTIFICATE_SLACK: f64 = 1e-9;

pub trait SinrModel {
    fn users(&self) -> usize;
    fn cells(&self) -> usize;

    /// G_kl(q) = SINR_kl(q) / q_kl for every user.
    fn gains(&self, q: &UserGrid<f64>) -> Result<UserGrid<f64>>;

    fn sinr(&self, q: &UserGrid<f64>) -> Result<UserGrid<f64>> {
        let g = self.gains(q)?;
        Ok(UserGrid::from_fn(self.users(), self.cells(), |k, l| q[(k, l)] * g[(k, l)]))
    }
}

impl<M: SinrModel + ?Sized> SinrModel for &M {
    fn users(&self) -> usize {
        (**self).users()
    }
    fn cells(&self) -> usize {
        (**self).cells()
    }
    fn gains(&self, q: &UserGrid<f64>) -> Result<UserGrid<f64>> {
        (**self).gains(q)
    }
}

/// The link parameters a combiner-based model is built on.
#[derive(Debug, Clone, Copy)]
pub struct Link<'a> {
    pub beta: &'a LargeScaleFading,
    pub p: &'a UserGrid<f64>,
    pub antennas: usize,
    pub kind: ReceiverKind,
}

/// A model whose SINRs come from explicit second-stage combiners.
pub trait CombinerModel: SinrModel {
    fn link(&self) -> Link<'_>;
    fn combiners(&self, q: &UserGrid<f64>) -> Result<LsfdCombiners>;
}

/// I_kl(q) = q_kl / SINR_kl(q); infinite for users that cannot be served at all.
pub fn interference<M: SinrModel + ?Sized>(model: &M, q: &UserGrid<f64>) -> Result<UserGrid<f64>> {
    Ok(model.gains(q)?.map(|g| if *g > 0.0 { 1.0 / g } else { f64::INFINITY }))
}

/// Global LSFD with the optimal combiner recomputed for every q.
#[derive(Debug, Clone)]
pub struct OptimalLsfd<'a> {
    pub beta: &'a LargeScaleFading,
    pub p: &'a UserGrid<f64>,
    pub antennas: usize,
    pub kind: ReceiverKind,
}

impl SinrModel for OptimalLsfd<'_> {
    fn users(&self) -> usize {
        self.beta.users_per_cell()
    }
    fn cells(&self) -> usize {
        self.beta.num_cells()
    }
    fn gains(&self, q: &UserGrid<f64>) -> Result<UserGrid<f64>> {
        let lam = lambda(self.kind, self.beta, self.p, q, self.antennas)?;
        optimal_gains(self.beta, self.p, q, self.antennas, &lam)
    }
}

impl CombinerModel for OptimalLsfd<'_> {
    fn link(&self) -> Link<'_> {
        Link { beta: self.beta, p: self.p, antennas: self.antennas, kind: self.kind }
    }
    fn combiners(&self, q: &UserGrid<f64>) -> Result<LsfdCombiners> {
        Ok(optimal_combiners(self.kind, self.beta, self.p, q, self.antennas)?.0)
    }
}

/// Combiners that do not depend on q (single-cell decoding, ZF-LSFD).
#[derive(Debug, Clone)]
pub struct FixedCombiners<'a> {
    pub beta: &'a LargeScaleFading,
    pub p: &'a UserGrid<f64>,
    pub antennas: usize,
    pub combiners: &'a LsfdCombiners,
}

impl SinrModel for FixedCombiners<'_> {
    fn users(&self) -> usize {
        self.beta.users_per_cell()
    }
    fn cells(&self) -> usize {
        self.beta.num_cells()
    }
    fn gains(&self, q: &UserGrid<f64>) -> Result<UserGrid<f64>> {
        self.combiners.gains(self.beta, self.p, q, self.antennas)
    }
}

impl CombinerModel for FixedCombiners<'_> {
    fn link(&self) -> Link<'_> {
        Link { beta: self.beta, p: self.p, antennas: self.antennas, kind: self.combiners.kind }
    }
    fn combiners(&self, _q: &UserGrid<f64>) -> Result<LsfdCombiners> {
        Ok(self.combiners.clone())
    }
}

/// max_kl ‖β_kl‖² P_max Q_max M: SINR bound used to open the bisection bracket.
pub fn gamma_max_bound(beta: &LargeScaleFading, p_max: f64, q_max: f64, antennas: usize) -> f64 {
    let mut best: f64 = 0.0;
    for k in 0..beta.users_per_cell() {
        for l in 0..beta.num_cells() {
            best = best.max(beta.column(k, l).norm_squared());
        }
    }
    best * p_max * q_max * antennas as f64
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeasibilityOptions {
    pub max_iterations: usize,
    /// Stop once the upper and lower iterates agree to this relative gap.
    pub tolerance: f64,
    /// Relative SINR slack of the fallback verdict when the cap is hit.
    pub fallback_slack: f64,
}

impl Default for FeasibilityOptions {
    fn default() -> Self {
        Self { max_iterations: 500, tolerance: 1e-8, fallback_slack: 1e-6 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Feasibility {
    pub feasible: bool,
    /// Minimal-power solution when feasible, the clamped iterate otherwise.
    pub q: UserGrid<f64>,
    pub iterations: usize,
    /// False when the iteration cap was hit and the verdict is the fallback test.
    pub converged: bool,
}

/// Decides whether every user can reach SINR `gamma` with powers in [0, q_max].
///
/// Two monotone iterations run side by side: q ← min(Q_max, γ I(q)) from Q_max
/// decreases, q ← γ I(q) from 0 increases towards the minimal fixed point. The
/// first proves feasibility as soon as its iterate meets every target; the
/// second proves infeasibility as soon as it exceeds Q_max.
pub fn feasibility_check<M: SinrModel + ?Sized>(
    model: &M,
    gamma: f64,
    q_max: f64,
    opts: &FeasibilityOptions,
) -> Result<Feasibility> {
    let (users, cells) = (model.users(), model.cells());
    if gamma <= 0.0 {
        return Ok(Feasibility { feasible: true, q: UserGrid::filled(users, cells, 0.0), iterations: 0, converged: true });
    }
    let mut upper = UserGrid::filled(users, cells, q_max);
    let mut lower = UserGrid::filled(users, cells, 0.0);
    let mut certified = false;
    for it in 1..=opts.max_iterations {
        let gu = model.gains(&upper)?;
        if !certified && meets_target(&upper, &gu, gamma, CERTIFICATE_SLACK) {
            certified = true;
        }
        if certified && relative_gap(&upper, &lower) <= opts.tolerance {
            return Ok(Feasibility { feasible: true, q: upper, iterations: it, converged: true });
        }
        let gl = model.gains(&lower)?;
        for (x, g) in lower.as_mut_slice().iter_mut().zip(gl.as_slice()) {
            *x = gamma / g;
        }
        if lower.as_slice().iter().any(|x| !(*x <= q_max * (1.0 + CERTIFICATE_SLACK))) {
            return Ok(Feasibility { feasible: false, q: upper, iterations: it, converged: true });
        }
        for (x, g) in upper.as_mut_slice().iter_mut().zip(gu.as_slice()) {
            *x = q_max.min(gamma / g);
        }
    }
    let g = model.gains(&upper)?;
    let feasible = certified || meets_target(&upper, &g, gamma, opts.fallback_slack);
    Ok(Feasibility { feasible, q: upper, iterations: opts.max_iterations, converged: false })
}

fn meets_target(q: &UserGrid<f64>, gains: &UserGrid<f64>, gamma: f64, slack: f64) -> bool {
    q.as_slice().iter().zip(gains.as_slice()).all(|(q, g)| q * g >= gamma * (1.0 - slack))
}

pub(crate) fn relative_gap(upper: &UserGrid<f64>, lower: &UserGrid<f64>) -> f64 {
    upper
        .as_slice()
        .iter()
        .zip(lower.as_slice())
        .map(|(u, l)| if *u > 0.0 { (u - l).abs() / u } else { 0.0 })
        .fold(0.0, f64::max)
}

/// Plain fixed-point iteration q ← γ I(q), optionally clamped at `cap`, from an
/// arbitrary start. Returns the final iterate and the number of steps taken.
pub fn fixed_point_iteration<M: SinrModel + ?Sized>(
    model: &M,
    gamma: f64,
    start: UserGrid<f64>,
    cap: Option<f64>,
    tolerance: f64,
    max_iterations: usize,
) -> Result<(UserGrid<f64>, usize)> {
    let mut q = start;
    for it in 1..=max_iterations {
        let g = model.gains(&q)?;
        let next = UserGrid::from_fn(q.users(), q.cells(), |k, l| {
            let t = gamma / g[(k, l)];
            cap.map_or(t, |c| t.min(c))
        });
        let gap = relative_gap(&next, &q);
        q = next;
        if gap <= tolerance {
            return Ok((q, it));
        }
    }
    Ok((q, max_iterations))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Tolerance {
    Absolute(f64),
    /// Width relative to the current feasible lower end.
    Relative(f64),
}

impl Tolerance {
    fn width(self, lo: f64) -> f64 {
        match self {
            Tolerance::Absolute(e) => e,
            Tolerance::Relative(r) => r * lo,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BisectionOptions {
    pub tolerance: Tolerance,
    pub feasibility: FeasibilityOptions,
    /// Externally known upper bound on the max-min SINR, if any.
    pub gamma_upper: Option<f64>,
    pub max_steps: usize,
}

impl Default for BisectionOptions {
    fn default() -> Self {
        Self { tolerance: Tolerance::Relative(1e-3), feasibility: FeasibilityOptions::default(), gamma_upper: None, max_steps: 200 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BisectionResult {
    pub gamma_opt: f64,
    pub q_opt: UserGrid<f64>,
    pub iterations: usize,
    pub feasibility_trace: Vec<(f64, bool)>,
    /// Bracket width at termination.
    pub epsilon: f64,
}

/// Max-min SINR by bisection on the common target.
///
/// The bracket opens at [min SINR with every user at Q_max, smallest
/// single-user SINR bound]: the lower end is achieved by full power, and no
/// user can beat its SINR when alone at full power.
pub fn optimize_powers_bisection<M: SinrModel + ?Sized>(
    model: &M,
    q_max: f64,
    opts: &BisectionOptions,
) -> Result<BisectionResult> {
    let (users, cells) = (model.users(), model.cells());
    let full = UserGrid::filled(users, cells, q_max);
    let mut lo = model.sinr(&full)?.min();
    let mut hi = single_user_bound(model, q_max)?;
    if let Some(g) = opts.gamma_upper {
        hi = hi.min(g);
    }
    let mut trace = Vec::new();
    if !(lo > 0.0) {
        return Ok(BisectionResult {
            gamma_opt: 0.0,
            q_opt: UserGrid::filled(users, cells, 0.0),
            iterations: 0,
            feasibility_trace: trace,
            epsilon: 0.0,
        });
    }
    hi = hi.max(lo);

    let check = |gamma: f64, trace: &mut Vec<(f64, bool)>| -> Result<Feasibility> {
        let f = feasibility_check(model, gamma, q_max, &opts.feasibility)?;
        trace.push((gamma, f.feasible));
        Ok(f)
    };

    let top = check(hi, &mut trace)?;
    if top.feasible {
        return Ok(BisectionResult { gamma_opt: hi, q_opt: top.q, iterations: 1, feasibility_trace: trace, epsilon: 0.0 });
    }
    let start = check(lo, &mut trace)?;
    let mut q_opt = if start.feasible { start.q } else { full };
    let mut steps = 2;
    while hi - lo > opts.tolerance.width(lo) && steps < opts.max_steps {
        let mid = 0.5 * (lo + hi);
        let f = check(mid, &mut trace)?;
        if f.feasible {
            lo = mid;
            q_opt = f.q;
        } else {
            hi = mid;
        }
        steps += 1;
    }
    Ok(BisectionResult { gamma_opt: lo, q_opt, iterations: steps, feasibility_trace: trace, epsilon: hi - lo })
}

/// min over users of the SINR reached alone at full power.
pub fn single_user_bound<M: SinrModel + ?Sized>(model: &M, q_max: f64) -> Result<f64> {
    let (users, cells) = (model.users(), model.cells());
    let mut bound = f64::INFINITY;
    let mut q = UserGrid::filled(users, cells, 0.0);
    for k in 0..users {
        for l in 0..cells {
            q[(k, l)] = q_max;
            bound = bound.min(q_max * model.gains(&q)?[(k, l)]);
            q[(k, l)] = 0.0;
        }
    }
    Ok(bound)
}

/// One user's power update towards target `gamma` under the cap `q_max`.
pub fn distributed_power_update(q_prev: f64, sinr_prev: f64, gamma: f64, q_max: f64) -> f64 {
    if q_prev / sinr_prev <= q_max / gamma {
        q_prev * gamma / sinr_prev
    } else {
        q_max * q_max / gamma * (sinr_prev / q_prev)
    }
}
