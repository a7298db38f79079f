mod common;

use common::{depressed_cubic_roots, example_system};
use odeco::modal::from_modal;
use odeco::robust::{
    dbar_max, hat_threshold, iss_envelope, robust_certificate, robust_threshold,
    DisturbanceEnvelope,
};
use odeco::sim::{
    integrate, make_paper_disturbance, measure_ultimate_magnitude, DisturbanceSignal,
    IntegrationOptions,
};
use odeco::ModeParams;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn mode(kappa: f64, lambda: f64, p: u32) -> ModeParams {
    ModeParams::new(kappa, lambda, p).unwrap()
}

/// Smallest positive root of `λs³ + κs + d̄` via the cubic formula.
fn cubic_smallest_positive(kappa: f64, lambda: f64, dbar: f64) -> f64 {
    depressed_cubic_roots(kappa / lambda, dbar / lambda)
        .into_iter()
        .filter(|&s| s > 0.0)
        .fold(f64::INFINITY, f64::min)
}

#[test]
fn dbar_max_against_grid_scan() {
    for (kappa, lambda) in [(-1.0, 1.0), (-2.0, 1.0), (-0.7, 2.5)] {
        let m = mode(kappa, lambda, 2);
        let c = (-kappa / lambda).sqrt();
        let grid = 1_000_000;
        let best = (0..=grid)
            .map(|i| {
                let s = c * i as f64 / grid as f64;
                -kappa * s - lambda * s.powi(3)
            })
            .fold(f64::NEG_INFINITY, f64::max);
        let analytic = dbar_max(&m).unwrap();
        assert!((analytic - best).abs() <= 1e-9, "{analytic} vs {best}");
    }
    let scaled = dbar_max(&mode(-2.0, 1.0, 2)).unwrap();
    assert!((scaled - 2.0 * 2f64.powf(1.5) / (3.0 * 3f64.sqrt())).abs() < 1e-14);
    assert!((dbar_max(&mode(-1.0, 1.0, 2)).unwrap() - 0.384_900_2).abs() < 1e-7);
}

#[test]
fn thresholds_against_cubic_formula() {
    let c = robust_threshold(&mode(-1.0, 1.0, 2), 0.15).unwrap();
    let oracle = cubic_smallest_positive(-1.0, 1.0, 0.15);
    assert!((c - oracle).abs() <= 1e-10);
    assert!((c - 0.153_625_7).abs() < 1e-7);

    let h = hat_threshold(&mode(-1.0, -0.5, 2), 0.15).unwrap();
    let oracle = depressed_cubic_roots(2.0, -0.3)[0];
    assert!((h - oracle).abs() <= 1e-10);
    assert!((h - 0.148_367_0).abs() < 1e-7);

    let limit = dbar_max(&mode(-1.0, 1.0, 2)).unwrap();
    let near = robust_threshold(&mode(-1.0, 1.0, 2), limit - 1e-12).unwrap();
    assert!((near - 1.0 / 3f64.sqrt()).abs() < 1e-5);
}

#[test]
fn residuals_ordering_and_monotonicity() {
    let mut rng = ChaCha8Rng::seed_from_u64(41);
    for _ in 0..200 {
        let p = 2 * rng.gen_range(1..=3);
        let m = mode(rng.gen_range(-3.0..-0.1), rng.gen_range(0.1..2.0), p);
        let limit = dbar_max(&m).unwrap();
        let c_star = (-m.kappa / m.lambda).powf(1.0 / p as f64);
        let mut prev = 0.0;
        for i in 1..20 {
            let d = limit * i as f64 / 20.0;
            let c = robust_threshold(&m, d).unwrap();
            let res = m.lambda * c.powi(p as i32 + 1) + m.kappa * c + d;
            assert!(res.abs() <= 1e-12);
            assert!(c > 0.0 && c < c_star);
            assert!(c > prev);
            prev = c;
        }
        let m_hat = mode(m.kappa, -m.lambda, p);
        let d = rng.gen_range(0.0..1.0);
        let h = hat_threshold(&m_hat, d).unwrap();
        let res = m_hat.lambda * h.powi(p as i32 + 1) + m_hat.kappa * h + d;
        assert!(res.abs() <= 1e-12);
    }
}

#[test]
fn bang_bang_worst_case_keeps_robust_set_invariant() {
    let sys = example_system();
    let c_tilde = robust_threshold(&sys.mode(0), 0.15).unwrap();
    let x0 = from_modal(&sys, &[0.99 * c_tilde, 0.0]).unwrap();
    let signal = DisturbanceSignal::BangBang {
        bounds: vec![0.15, 0.15],
        modes: vec![0, 1],
    };
    let traj = integrate(&sys, &x0, &IntegrationOptions::new(1e-3, 100.0), &signal).unwrap();
    let worst = traj.modal.iter().map(|y| y[0].abs()).fold(0.0, f64::max);
    assert!(worst <= c_tilde + 1e-9, "{worst} > {c_tilde}");
}

#[test]
fn sinusoidal_ultimate_bounds_hold() {
    let sys = example_system();
    let cert = robust_certificate(&sys, &DisturbanceEnvelope::uniform(2, 0.15).unwrap()).unwrap();
    let x0 = from_modal(&sys, &[0.5 * cert.modes[0].bound, 0.5]).unwrap();
    let signal = make_paper_disturbance(0.15, 1.0).unwrap();
    let traj = integrate(&sys, &x0, &IntegrationOptions::new(1e-3, 100.0), &signal).unwrap();
    let sup = measure_ultimate_magnitude(&traj, (50.0, 100.0)).unwrap();
    for r in 0..2 {
        assert!(
            sup[r] <= cert.modes[r].bound + 1e-6,
            "mode {r}: {} > {}",
            sup[r],
            cert.modes[r].bound
        );
    }
}

#[test]
fn envelope_dominates_disturbed_trajectories() {
    let sys = example_system();
    let cert = robust_certificate(&sys, &DisturbanceEnvelope::uniform(2, 0.15).unwrap()).unwrap();
    let bounds = cert.bounds();
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    let signals = [
        make_paper_disturbance(0.15, 1.0).unwrap(),
        make_paper_disturbance(0.15, 3.7).unwrap(),
        DisturbanceSignal::BangBang {
            bounds: vec![0.15, 0.15],
            modes: vec![0, 1],
        },
    ];
    for signal in &signals {
        for _ in 0..5 {
            let y0: Vec<f64> = bounds.iter().map(|&b| rng.gen_range(-b..=b)).collect();
            let x0 = from_modal(&sys, &y0).unwrap();
            let traj = integrate(&sys, &x0, &IntegrationOptions::new(1e-3, 20.0), signal).unwrap();
            for (t, y) in traj.times.iter().zip(&traj.modal) {
                for r in 0..2 {
                    let env = iss_envelope(cert.modes[r].alpha, y0[r].abs(), 0.15, *t).unwrap();
                    assert!(
                        y[r].abs() <= env + 1e-9,
                        "t={t} mode {r}: {} > {env}",
                        y[r].abs()
                    );
                }
            }
        }
    }
    for m in &cert.modes {
        assert_eq!(m.gain(m.dbar), Some(m.bound));
    }
}
