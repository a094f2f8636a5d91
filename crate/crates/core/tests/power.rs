use lsfd_core::channel::LargeScaleFading;
use lsfd_core::lsfd::LsfdCombiners;
use lsfd_core::power::{
    distributed_power_update, feasibility_check, fixed_point_iteration, interference, optimize_powers_bisection,
    BisectionOptions, FeasibilityOptions, FixedCombiners, OptimalLsfd, SinrModel, Tolerance,
};
use lsfd_core::receivers::ReceiverKind;
use lsfd_core::rng::{stream, SimRng};
use lsfd_core::UserGrid;
use rand::Rng;

const KINDS: [ReceiverKind; 2] = [ReceiverKind::MatchedFilter, ReceiverKind::ZeroForcing];

struct Instance {
    beta: LargeScaleFading,
    p: UserGrid<f64>,
}

fn random_instance(rng: &mut SimRng) -> Instance {
    let cells = rng.random_range(1..=5);
    let users = rng.random_range(1..=3);
    let beta = LargeScaleFading::from_fn(cells, users, |j, _, l| {
        let scale: f64 = if j == l { 1.0 } else { 0.1 };
        scale * 10f64.powf(rng.random_range(-1.0..1.0))
    });
    let p = UserGrid::from_fn(users, cells, |_, _| rng.random_range(0.5..5.0));
    Instance { beta, p }
}

fn random_q(rng: &mut SimRng, users: usize, cells: usize) -> UserGrid<f64> {
    UserGrid::from_fn(users, cells, |_, _| rng.random_range(0.01..10.0))
}

fn unit_instance() -> (LargeScaleFading, UserGrid<f64>) {
    (LargeScaleFading::from_fn(1, 1, |_, _, _| 1.0), UserGrid::filled(1, 1, 1.0))
}

fn for_each_model(inst: &Instance, antennas: usize, mut f: impl FnMut(&dyn SinrModel)) {
    for kind in KINDS {
        f(&OptimalLsfd { beta: &inst.beta, p: &inst.p, antennas, kind });
        let single = LsfdCombiners::single_cell(kind, inst.beta.num_cells(), inst.beta.users_per_cell());
        f(&FixedCombiners { beta: &inst.beta, p: &inst.p, antennas, combiners: &single });
    }
}

#[test]
fn single_user_interference_closed_form() {
    let (beta, p) = unit_instance();
    let model = OptimalLsfd { beta: &beta, p: &p, antennas: 100, kind: ReceiverKind::MatchedFilter };
    for q in [0.0, 0.25, 1.0, 7.0] {
        let i = interference(&model, &UserGrid::filled(1, 1, q)).unwrap()[(0, 0)];
        let expected = 2.0 * (1.0 + q) / 100.0;
        assert!((i / expected - 1.0).abs() < 1e-12, "{i} vs {expected}");
    }
}

#[test]
fn interference_is_positive_monotone_and_scalable() {
    let mut rng = stream(11, 0);
    let mut violations = 0usize;
    for _ in 0..100 {
        let inst = random_instance(&mut rng);
        let (users, cells) = (inst.beta.users_per_cell(), inst.beta.num_cells());
        let q2 = random_q(&mut rng, users, cells);
        let q1 = q2.map(|x| x * rng.random_range(1.0..3.0));
        let alpha = rng.random_range(1.01..3.0);
        let q_scaled = q1.map(|x| x * alpha);
        let q_near = q1.map(|x| x * alpha.powf(rng.random_range(-0.99..0.99)));
        for_each_model(&inst, 50, |model| {
            let i1 = interference(model, &q1).unwrap();
            let i2 = interference(model, &q2).unwrap();
            let is = interference(model, &q_scaled).unwrap();
            let inear = interference(model, &q_near).unwrap();
            for n in 0..i1.as_slice().len() {
                let (a, b, s, c) = (i1.as_slice()[n], i2.as_slice()[n], is.as_slice()[n], inear.as_slice()[n]);
                let ok = a > 0.0
                    && a >= b * (1.0 - 1e-12)
                    && s < alpha * a
                    && a / alpha < c
                    && c < alpha * a
                    && (1.0 / a) / alpha < 1.0 / c
                    && 1.0 / c < alpha / a;
                if !ok {
                    violations += 1;
                }
            }
        });
    }
    assert_eq!(violations, 0);
}

#[test]
fn unit_instance_feasibility() {
    let (beta, p) = unit_instance();
    let model = OptimalLsfd { beta: &beta, p: &p, antennas: 100, kind: ReceiverKind::MatchedFilter };
    let opts = FeasibilityOptions::default();
    let f = feasibility_check(&model, 0.0, 1.0, &opts).unwrap();
    assert!(f.feasible && f.q[(0, 0)] == 0.0);
    let f = feasibility_check(&model, 10.0, 1.0, &opts).unwrap();
    assert!(f.feasible);
    assert!((f.q[(0, 0)] - 0.25).abs() < 1e-6);
    assert!(!feasibility_check(&model, 26.0, 1.0, &opts).unwrap().feasible);
}

#[test]
fn unit_instance_bisection() {
    let (beta, p) = unit_instance();
    let model = OptimalLsfd { beta: &beta, p: &p, antennas: 100, kind: ReceiverKind::MatchedFilter };
    let opts = BisectionOptions { tolerance: Tolerance::Absolute(1e-6), ..Default::default() };
    let r = optimize_powers_bisection(&model, 1.0, &opts).unwrap();
    assert!((r.gamma_opt - 25.0).abs() <= 1e-6);
    assert!((r.q_opt[(0, 0)] - 1.0).abs() < 1e-6);
}

#[test]
fn bisection_contract_on_random_instances() {
    let mut rng = stream(12, 0);
    let q_max = 10.0;
    for _ in 0..20 {
        let inst = random_instance(&mut rng);
        for kind in KINDS {
            let model = OptimalLsfd { beta: &inst.beta, p: &inst.p, antennas: 50, kind };
            let opts = BisectionOptions { tolerance: Tolerance::Absolute(1e-4), ..Default::default() };
            let r = optimize_powers_bisection(&model, q_max, &opts).unwrap();
            let fopts = FeasibilityOptions::default();
            assert!(feasibility_check(&model, r.gamma_opt, q_max, &fopts).unwrap().feasible);
            if r.epsilon > 0.0 {
                assert!(!feasibility_check(&model, r.gamma_opt + 2.0 * r.epsilon, q_max, &fopts).unwrap().feasible);
            }
            let sinr = model.sinr(&r.q_opt).unwrap();
            assert!(sinr.min() >= r.gamma_opt * (1.0 - 1e-6));
            assert!(r.q_opt.max() <= q_max * (1.0 + 1e-9));
            // Feasibility must be monotone along the trace.
            for &(g1, f1) in &r.feasibility_trace {
                for &(g2, f2) in &r.feasibility_trace {
                    if f1 && g2 < g1 {
                        assert!(f2, "γ={g1} feasible but γ={g2} not");
                    }
                }
            }
        }
    }
}

#[test]
fn fixed_point_is_unique() {
    let mut rng = stream(13, 0);
    let q_max = 10.0;
    for _ in 0..20 {
        let inst = random_instance(&mut rng);
        let (users, cells) = (inst.beta.users_per_cell(), inst.beta.num_cells());
        for kind in KINDS {
            let model = OptimalLsfd { beta: &inst.beta, p: &inst.p, antennas: 50, kind };
            let full = model.sinr(&UserGrid::filled(users, cells, q_max)).unwrap().min();
            let gamma = 0.5 * full;
            let starts = [
                UserGrid::filled(users, cells, 1e-12),
                UserGrid::filled(users, cells, q_max),
                random_q(&mut rng, users, cells),
            ];
            let ends: Vec<UserGrid<f64>> = starts
                .into_iter()
                .map(|s| fixed_point_iteration(&model, gamma, s, None, 1e-12, 5000).unwrap().0)
                .collect();
            for e in &ends[1..] {
                for (a, b) in e.as_slice().iter().zip(ends[0].as_slice()) {
                    assert!((a - b).abs() <= 1e-6 * b, "{a} vs {b}");
                }
            }
        }
    }
}

#[test]
fn symmetric_two_cell_instance_gives_equal_powers() {
    let beta = LargeScaleFading::from_fn(2, 2, |j, _, l| if j == l { 1.0 } else { 0.2 });
    let p = UserGrid::filled(2, 2, 1.0);
    for kind in KINDS {
        let model = OptimalLsfd { beta: &beta, p: &p, antennas: 20, kind };
        let r = optimize_powers_bisection(&model, 5.0, &BisectionOptions::default()).unwrap();
        let q0 = r.q_opt[(0, 0)];
        for q in r.q_opt.as_slice() {
            assert!((q - q0).abs() <= 1e-6 * q0.max(1e-300));
        }
    }
}

#[test]
fn distributed_update_branches() {
    let gamma = 4.0;
    assert_eq!(distributed_power_update(0.3, gamma, gamma, 1.0), 0.3);
    assert!((distributed_power_update(0.1, 2.0 * gamma, gamma, 1.0) - 0.05).abs() < 1e-15);
    assert!((distributed_power_update(1.0, gamma / 2.0, gamma, 1.0) - 0.5).abs() < 1e-15);
}
