use lsfd_core::channel::LargeScaleFading;
use lsfd_core::lsfd::{lambda, term_powers, zf_lsfd_all, LsfdCombiners};
use lsfd_core::receivers::{empirical_term_powers, ReceiverKind, TermExperiment};
use lsfd_core::rng::stream;
use lsfd_core::UserGrid;
use rand::Rng;

fn instance(seed: u64) -> (LargeScaleFading, UserGrid<f64>, UserGrid<f64>) {
    let mut rng = stream(seed, 0);
    let beta = LargeScaleFading::from_fn(3, 2, |j, _, l| {
        let base: f64 = if j == l { 1.0 } else { 0.15 };
        base * rng.random_range(0.5..2.0)
    });
    let p = UserGrid::from_fn(2, 3, |_, _| rng.random_range(0.5..2.0));
    let q = UserGrid::from_fn(2, 3, |_, _| rng.random_range(0.5..2.0));
    (beta, p, q)
}

fn random_combiners(kind: ReceiverKind, seed: u64) -> LsfdCombiners {
    let mut rng = stream(seed, 1);
    let mats = (0..2).map(|_| nalgebra::DMatrix::from_fn(3, 3, |j, l| if j == l { 1.0 } else { rng.random_range(-0.5..0.5) })).collect();
    LsfdCombiners::from_real(kind, mats)
}

fn check(kind: ReceiverKind, comb: &LsfdCombiners, samples: u64, tol: f64) {
    let (beta, p, q) = instance(11);
    let m = 30;
    let lam = lambda(kind, &beta, &p, &q, m).unwrap();
    let exp = TermExperiment { beta: &beta, p: &p, q: &q, antennas: m, combiners: comb, seed: 5, noise: true };
    let emp = empirical_term_powers(&exp, samples).unwrap();
    for ((k, l), e) in emp.indexed() {
        let col = comb.column(k, l);
        let t = term_powers(&col, &beta, &p, &q, m, &lam, k, l);
        for (name, a, b) in [("useful", e.powers.useful, t.useful), ("pilot", e.powers.pilot, t.pilot), ("other", e.powers.other, t.other)] {
            if b < 1e-12 * t.useful {
                // Cancelled term: the estimate only carries the error of the sample mean.
                assert!(a < 1e-4 * e.powers.useful, "{kind} ({k},{l}) {name}: {a}");
                continue;
            }
            assert!((a - b).abs() / b < tol, "{kind} ({k},{l}) {name}: {a} vs {b}");
        }
        for z in e.correlation_z {
            assert!(z < 4.0, "correlation z = {z}");
        }
    }
}

#[test]
fn matched_filter_terms_match_closed_form() {
    let kind = ReceiverKind::MatchedFilter;
    check(kind, &LsfdCombiners::single_cell(kind, 3, 2), 20_000, 0.05);
    check(kind, &random_combiners(kind, 3), 20_000, 0.05);
}

#[test]
fn zero_forcing_terms_match_closed_form() {
    let (beta, _, _) = instance(11);
    let kind = ReceiverKind::ZeroForcing;
    check(kind, &LsfdCombiners::single_cell(kind, 3, 2), 20_000, 0.05);
    check(kind, &zf_lsfd_all(kind, &beta).unwrap(), 20_000, 0.05);
}
