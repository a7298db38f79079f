#![allow(dead_code)]

use std::f64::consts::PI;

use odeco::certify::threshold;
use odeco::tensor::rotation_basis;
use odeco::{ModeParams, OdecoSystem};
use rand::Rng;

/// The planar `k = 4` example: θ = π/6, λ = (1, −1/2), κ = (−1, −1).
pub fn example_system() -> OdecoSystem {
    OdecoSystem::new(
        4,
        rotation_basis(PI / 6.0),
        vec![1.0, -0.5],
        vec![-1.0, -1.0],
    )
    .unwrap()
}

/// One-dimensional system carrying a single mode.
pub fn scalar_system(m: &ModeParams) -> OdecoSystem {
    OdecoSystem::new(
        m.p as usize + 2,
        vec![vec![1.0]],
        vec![m.lambda],
        vec![m.kappa],
    )
    .unwrap()
}

/// Plain scalar RK4, independent of the library integrator.
pub fn scalar_rk4(f: impl Fn(f64) -> f64, y0: f64, t_end: f64, h: f64) -> f64 {
    let steps = (t_end / h).round() as usize;
    let h = t_end / steps as f64;
    let mut y = y0;
    for _ in 0..steps {
        let k1 = f(y);
        let k2 = f(y + 0.5 * h * k1);
        let k3 = f(y + 0.5 * h * k2);
        let k4 = f(y + h * k3);
        y += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    }
    y
}

/// Real roots of the depressed cubic `s³ + a s + b = 0` (Cardano / trigonometric).
pub fn depressed_cubic_roots(a: f64, b: f64) -> Vec<f64> {
    let disc = (b / 2.0).powi(2) + (a / 3.0).powi(3);
    if disc > 0.0 {
        let sq = disc.sqrt();
        vec![(-b / 2.0 + sq).cbrt() + (-b / 2.0 - sq).cbrt()]
    } else {
        let r = 2.0 * (-a / 3.0).sqrt();
        let phi = ((3.0 * b) / (a * r)).acos() / 3.0;
        (0..3)
            .map(|j| r * (phi - 2.0 * PI * j as f64 / 3.0).cos())
            .collect()
    }
}

/// Random mode with κ ∈ [−3, −0.1], λ ∈ [−2, 2], p ∈ {1, 2, 3}.
pub fn random_mode<R: Rng>(rng: &mut R) -> ModeParams {
    ModeParams::new(
        rng.gen_range(-3.0..=-0.1),
        rng.gen_range(-2.0..=2.0),
        rng.gen_range(1..=3),
    )
    .unwrap()
}

/// Initial value strictly inside the convergent regime of `m`, with |y0| ≤ 3.
pub fn convergent_y0<R: Rng>(rng: &mut R, m: &ModeParams) -> f64 {
    let cap = 3.0;
    match threshold(m).unwrap() {
        None => rng.gen_range(-cap..=cap),
        Some(c) if m.p.is_multiple_of(2) => {
            let b = (0.95 * c).min(cap);
            rng.gen_range(-b..=b)
        }
        Some(c) if c > 0.0 => rng.gen_range(-cap..(0.95 * c).min(cap)),
        Some(c) => rng.gen_range((0.95 * c).max(-cap)..=cap),
    }
}
