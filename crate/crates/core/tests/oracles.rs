//! Catalog methods checked against values worked out by hand.

use glmlab::catalog;
use glmlab::glm::{abscissas, to_compact};
use glmlab::integrate::{halving, integrate, observed_order};
use glmlab::problems::{dahlquist, decay_forced};
use glmlab::{Method, SolveConfig};

/// The error-inhibiting method written as two coupled updates of the pair
/// `(u^{n-1/3}, u^n)`, solved for `u' = lambda u` with `z = lambda dt`.
fn eis_pair_update(z: f64, old: f64, cur: f64) -> (f64, f64) {
    let mid = (14.0 / 5.0 * old - 9.0 / 5.0 * cur + z * (9.0 / 5.0 * old - 6.0 / 5.0 * cur)) / (1.0 - z);
    let next = (14.0 / 5.0 * old - 9.0 / 5.0 * cur + z * (9.0 / 5.0 * old - 47.0 / 60.0 * cur - mid / 12.0)) / (1.0 - z);
    (mid, next)
}

#[test]
fn eis_matches_two_equation_update() {
    let e = catalog::get::<f64>("IE-EIS-3").unwrap();
    let lambda = -1.3;
    let dt = 0.1;
    let problem = dahlquist(lambda).with_t_span(0.0, 30.0 * dt);
    for method in [Method::from(&e), Method::from(&e).without_retained()] {
        let retained = method.retained.is_some();
        let rec = integrate(&problem, &method, &SolveConfig::new(dt)).unwrap();
        let (mut old, mut cur) = (rec.initial_history[0][0], rec.initial_history[1][0]);
        for state in &rec.states[1..] {
            (old, cur) = eis_pair_update(lambda * dt, old, cur);
            let err = (cur - state[0]).abs() / cur.abs();
            assert!(err <= 1e-12, "retained={retained}: {cur} vs {}", state[0]);
        }
    }
}

#[test]
fn ie_pre_post_3_abscissas() {
    // copy stages sit at their steps; the solve reads
    // (-1/2) u^{n-2} + u^{n-1} + (1/2) u^n, so c = 1 + (-1/2)(-2) + (-1) = 1
    let e = catalog::get::<f64>("IE-Pre-Post-3").unwrap();
    let c = abscissas(&to_compact(&e.tableau).unwrap()).c;
    assert_eq!(c.len(), 3);
    for (got, want) in c.iter().zip([-2.0, -1.0, 1.0]) {
        assert!((got - want).abs() < 1e-15, "{c:?}");
    }
}

#[test]
fn bdf2_neutral_root_at_origin() {
    // roots of x^2 - 4/3 x + 1/3 are 1 and 1/3
    let e = catalog::get::<f64>("BDF2").unwrap();
    let op = glmlab::stability::EvolutionOperator::new(&to_compact(&e.tableau).unwrap());
    let mut ev: Vec<f64> = op
        .eigenvalues(num_complex::Complex::new(0.0, 0.0))
        .unwrap()
        .iter()
        .map(|x| x.re)
        .collect();
    ev.sort_by(f64::total_cmp);
    assert!((ev[0] - 1.0 / 3.0).abs() < 1e-12 && (ev[1] - 1.0).abs() < 1e-12, "{ev:?}");
}

#[test]
fn ie_pre_post_3_third_order_on_short_span() {
    let e = catalog::get::<f64>("IE-Pre-Post-3").unwrap();
    let problem = decay_forced().with_t_span(0.0, 2.0);
    let table = observed_order(&problem, &Method::from(&e), &halving(0.2, 5), &SolveConfig::new(0.2)).unwrap();
    let slope = table.slope.unwrap();
    assert!((slope - 3.0).abs() <= 0.2, "{slope}");
    assert!(table.levels.iter().all(|l| l.error.is_some()));
}

#[test]
fn single_precision_run_tracks_double() {
    let e64 = catalog::get::<f64>("IE-Pre-2").unwrap();
    let e32 = catalog::get::<f32>("IE-Pre-2").unwrap();
    let p64 = decay_forced::<f64>().with_t_span(0.0, 1.0);
    let p32 = decay_forced::<f32>().with_t_span(0.0, 1.0);
    let r64 = integrate(&p64, &Method::from(&e64), &SolveConfig::new(0.1)).unwrap();
    let mut cfg32 = glmlab::integrate::SolveConfig::new(0.1f32);
    cfg32.newton_tol = 1e-6;
    let r32 = integrate(&p32, &glmlab::integrate::Method::from(&e32), &cfg32).unwrap();
    assert_eq!(r64.states.len(), r32.states.len());
    for (a, b) in r64.states.iter().zip(&r32.states) {
        assert!((a[0] - f64::from(b[0])).abs() < 1e-5, "{} vs {}", a[0], b[0]);
    }
}
