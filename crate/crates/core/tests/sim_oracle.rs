mod common;

use common::example_system;
use odeco::modal::{closed_form_state, from_modal};
use odeco::sim::{
    integrate, integrate_modal, make_paper_disturbance, DisturbanceSignal, IntegrationOptions,
};
use odeco::OdecoSystem;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn max_error_vs_closed_form(sys: &OdecoSystem, x0: &[f64], dt: f64, t_end: f64) -> f64 {
    let traj = integrate(
        sys,
        x0,
        &IntegrationOptions::new(dt, t_end),
        &DisturbanceSignal::None,
    )
    .unwrap();
    traj.times
        .iter()
        .zip(&traj.states)
        .map(|(t, x)| {
            let exact = closed_form_state(sys, x0, *t).unwrap();
            exact
                .iter()
                .zip(x)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max)
        })
        .fold(0.0, f64::max)
}

#[test]
fn example_trajectory_matches_closed_form() {
    let sys = example_system();
    let x0 = from_modal(&sys, &[0.5, 0.0]).unwrap();
    assert!(max_error_vs_closed_form(&sys, &x0, 1e-3, 5.0) <= 1e-6);
}

#[test]
fn rk4_is_fourth_order() {
    let sys = example_system();
    let x0 = from_modal(&sys, &[0.9, 1.5]).unwrap();
    let coarse = max_error_vs_closed_form(&sys, &x0, 0.04, 4.0);
    let fine = max_error_vs_closed_form(&sys, &x0, 0.02, 4.0);
    let order = (coarse / fine).log2();
    assert!(order >= 3.5, "measured order {order} ({coarse} -> {fine})");
}

#[test]
fn state_and_modal_integration_agree() {
    let mut rng = ChaCha8Rng::seed_from_u64(51);
    for _ in 0..5 {
        let n = rng.gen_range(2..=4);
        let sys = OdecoSystem::random(&mut rng, n, 4, (-1.0, 1.0), (-2.0, -0.5)).unwrap();
        let y0: Vec<f64> = (0..n).map(|_| rng.gen_range(-0.5..0.5)).collect();
        let x0 = from_modal(&sys, &y0).unwrap();
        let signal = make_paper_disturbance(0.1, 1.3).unwrap();
        let opts = IntegrationOptions::new(1e-3, 10.0);
        let a = integrate(&sys, &x0, &opts, &signal).unwrap();
        let b = integrate_modal(&sys, &y0, &opts, &signal).unwrap();
        for (ya, yb) in a.modal.iter().zip(&b.modal) {
            for (u, v) in ya.iter().zip(yb) {
                assert!((u - v).abs() <= 1e-10);
            }
        }
    }
}

#[test]
fn blowup_time_converges_across_thresholds() {
    let sys = OdecoSystem::new(4, vec![vec![1.0]], vec![1.0], vec![-1.0]).unwrap();
    let t_esc = 0.5 * (4.0f64 / 3.0).ln();
    let times: Vec<f64> = [1e3, 1e5, 1e7]
        .iter()
        .map(|&th| {
            integrate(
                &sys,
                &[2.0],
                &IntegrationOptions::new(1e-3, 1.0).with_threshold(th),
                &DisturbanceSignal::None,
            )
            .unwrap()
            .blowup_time()
            .unwrap()
        })
        .collect();
    for w in times.windows(2) {
        assert!(w[0] <= w[1]);
    }
    for t in &times {
        assert!((t - t_esc).abs() < 1e-3);
    }
}

#[test]
fn disturbance_respects_envelope_at_substeps() {
    let signal = make_paper_disturbance(0.15, 1.0).unwrap();
    let dt = 1e-3;
    for i in 0..100_000 {
        for frac in [0.0, 0.5, 1.0] {
            let d = signal.eval((i as f64 + frac) * dt, &[0.0, 0.0]);
            assert!(d.iter().all(|v| v.abs() <= 0.15));
        }
    }
}
