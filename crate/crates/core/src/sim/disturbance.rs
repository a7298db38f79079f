use std::f64::consts::FRAC_PI_2;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SinusoidProfile {
    pub amplitude: f64,
    /// Multiplies the base frequency `ω`.
    pub frequency_factor: f64,
    pub phase: f64,
}

/// Modal disturbance `d(t) = Σ_r d_r(t) v_r`, evaluated per mode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DisturbanceSignal {
    None,
    /// `d_r(t) = a_r sin(f_r ω t + φ_r)`; modes past the profile get zero.
    Sinusoid {
        omega: f64,
        profile: Vec<SinusoidProfile>,
    },
    /// `d_r(t) = d̄_r · sign(y_r(t))` on the listed (zero-based) modes, zero elsewhere.
    BangBang {
        bounds: Vec<f64>,
        modes: Vec<usize>,
    },
    /// Zero-order hold of a sampled table; zero before the first sample time.
    Custom {
        times: Vec<f64>,
        values: Vec<Vec<f64>>,
    },
}

impl DisturbanceSignal {
    /// Write `d_r(t)` into `out` given current modal coordinates `y`.
    pub fn eval_into(&self, t: f64, y: &[f64], out: &mut [f64]) {
        match self {
            DisturbanceSignal::None => out.iter_mut().for_each(|o| *o = 0.0),
            DisturbanceSignal::Sinusoid { omega, profile } => {
                for (r, o) in out.iter_mut().enumerate() {
                    *o = profile.get(r).map_or(0.0, |s| {
                        s.amplitude * (s.frequency_factor * omega * t + s.phase).sin()
                    });
                }
            }
            DisturbanceSignal::BangBang { bounds, modes } => {
                out.iter_mut().for_each(|o| *o = 0.0);
                for &r in modes {
                    if r < out.len() {
                        out[r] = bounds.get(r).copied().unwrap_or(0.0) * y[r].signum();
                    }
                }
            }
            DisturbanceSignal::Custom { times, values } => {
                let idx = times.partition_point(|&s| s <= t);
                if idx == 0 {
                    out.iter_mut().for_each(|o| *o = 0.0);
                } else {
                    let row = &values[idx - 1];
                    for (r, o) in out.iter_mut().enumerate() {
                        *o = row.get(r).copied().unwrap_or(0.0);
                    }
                }
            }
        }
    }

    pub fn eval(&self, t: f64, y: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; y.len()];
        self.eval_into(t, y, &mut out);
        out
    }

    /// Envelope `sup_t |d_r(t)|` for mode `r`.
    pub fn bound(&self, r: usize) -> f64 {
        match self {
            DisturbanceSignal::None => 0.0,
            DisturbanceSignal::Sinusoid { profile, .. } => {
                profile.get(r).map_or(0.0, |s| s.amplitude.abs())
            }
            DisturbanceSignal::BangBang { bounds, modes } => {
                if modes.contains(&r) {
                    bounds.get(r).map_or(0.0, |b| b.abs())
                } else {
                    0.0
                }
            }
            DisturbanceSignal::Custom { values, .. } => values
                .iter()
                .filter_map(|row| row.get(r))
                .fold(0.0, |acc, v| acc.max(v.abs())),
        }
    }

    pub(crate) fn validate(&self, n: usize) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidArgument(msg));
        match self {
            DisturbanceSignal::None => Ok(()),
            DisturbanceSignal::Sinusoid { omega, profile } => {
                if !omega.is_finite() {
                    return bad(format!(
                        "disturbance frequency must be finite (got {omega})"
                    ));
                }
                if profile.iter().any(|s| {
                    !(s.amplitude.is_finite()
                        && s.frequency_factor.is_finite()
                        && s.phase.is_finite())
                }) {
                    return bad("sinusoid profile entries must be finite".into());
                }
                Ok(())
            }
            DisturbanceSignal::BangBang { bounds, modes } => {
                if bounds.len() != n {
                    return bad(format!(
                        "expected {n} bang-bang bounds, got {}",
                        bounds.len()
                    ));
                }
                if bounds.iter().any(|b| !(b.is_finite() && *b >= 0.0)) {
                    return bad("bang-bang bounds must be finite and nonnegative".into());
                }
                if let Some(r) = modes.iter().find(|&&r| r >= n) {
                    return bad(format!("bang-bang mode index {r} out of range"));
                }
                Ok(())
            }
            DisturbanceSignal::Custom { times, values } => {
                if times.len() != values.len() {
                    return bad("custom disturbance needs one row per sample time".into());
                }
                if times.windows(2).any(|w| !(w[0] < w[1])) {
                    return bad("custom disturbance times must be strictly increasing".into());
                }
                if values
                    .iter()
                    .any(|row| row.len() != n || row.iter().any(|v| !v.is_finite()))
                {
                    return bad(format!(
                        "custom disturbance rows must hold {n} finite values"
                    ));
                }
                Ok(())
            }
        }
    }
}

fn check_amplitude(dbar: f64) -> Result<()> {
    if dbar >= 0.0 && dbar.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!(
            "disturbance amplitude must be finite and nonnegative (got {dbar})"
        )))
    }
}

/// `d₁ = d̄ sin(ωt)`, `d₂ = d̄ cos(0.9ωt)`, zero on any further mode.
pub fn make_paper_disturbance(dbar: f64, omega: f64) -> Result<DisturbanceSignal> {
    check_amplitude(dbar)?;
    sinusoid_disturbance(&[dbar, dbar], omega)
}

/// Per-mode sinusoids `d_r = d̄_r sin(0.9^{r-1} ω t + φ_r)` with `φ_r = π/2` on
/// even-numbered modes, so the first two modes match [`make_paper_disturbance`].
pub fn sinusoid_disturbance(bounds: &[f64], omega: f64) -> Result<DisturbanceSignal> {
    for &b in bounds {
        check_amplitude(b)?;
    }
    if !(omega > 0.0 && omega.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "disturbance frequency must be positive (got {omega})"
        )));
    }
    let profile = bounds
        .iter()
        .enumerate()
        .map(|(r, &amplitude)| SinusoidProfile {
            amplitude,
            frequency_factor: 0.9f64.powi(r as i32),
            phase: if r % 2 == 1 { FRAC_PI_2 } else { 0.0 },
        })
        .collect();
    Ok(DisturbanceSignal::Sinusoid { omega, profile })
}

/// Piecewise-constant disturbance redrawn uniformly in `[-d̄_r, d̄_r]` every
/// `hold` time units over `[0, t_end]`.
pub fn random_hold_disturbance<R: Rng + ?Sized>(
    rng: &mut R,
    bounds: &[f64],
    hold: f64,
    t_end: f64,
) -> Result<DisturbanceSignal> {
    for &b in bounds {
        check_amplitude(b)?;
    }
    if !(hold > 0.0 && hold.is_finite() && t_end >= 0.0 && t_end.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "hold interval must be positive and horizon finite (got hold {hold}, t_end {t_end})"
        )));
    }
    let count = (t_end / hold).ceil() as usize + 1;
    let times = (0..count).map(|i| i as f64 * hold).collect();
    let values = (0..count)
        .map(|_| {
            bounds
                .iter()
                .map(|&b| if b > 0.0 { rng.gen_range(-b..=b) } else { 0.0 })
                .collect()
        })
        .collect();
    Ok(DisturbanceSignal::Custom { times, values })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn paper_signal_at_zero() {
        let d = make_paper_disturbance(0.15, 1.0).unwrap();
        let v = d.eval(0.0, &[0.0, 0.0, 0.0]);
        assert_eq!(v, vec![0.0, 0.15, 0.0]);
        let t = 2.3;
        let v = d.eval(t, &[0.0, 0.0]);
        assert!((v[0] - 0.15 * t.sin()).abs() < 1e-16);
        assert!((v[1] - 0.15 * (0.9 * t).cos()).abs() < 1e-15);
        let zero = make_paper_disturbance(0.0, 1.0).unwrap();
        assert_eq!(zero.eval(1.7, &[0.0, 0.0]), vec![0.0, 0.0]);
        assert!(make_paper_disturbance(0.1, 0.0).is_err());
    }

    #[test]
    fn amplitude_bound_holds_densely() {
        let d = make_paper_disturbance(0.15, 1.0).unwrap();
        for i in 0..=100_000 {
            let v = d.eval(i as f64 * 1e-3, &[0.0, 0.0]);
            assert!(v[0].abs() <= 0.15 && v[1].abs() <= 0.15);
        }
        assert_eq!(d.bound(0), 0.15);
        assert_eq!(d.bound(2), 0.0);
    }

    #[test]
    fn per_mode_sinusoids_extend_the_paper_signal() {
        let paper = make_paper_disturbance(0.2, 1.3).unwrap();
        let general = sinusoid_disturbance(&[0.2, 0.2, 0.1], 1.3).unwrap();
        for i in 0..50 {
            let t = i as f64 * 0.37;
            let a = paper.eval(t, &[0.0; 3]);
            let b = general.eval(t, &[0.0; 3]);
            assert_eq!(a[..2], b[..2]);
            assert!(b[2].abs() <= 0.1);
        }
        assert!(sinusoid_disturbance(&[-0.1], 1.0).is_err());
    }

    #[test]
    fn random_hold_stays_within_bounds() {
        use rand::SeedableRng;
        let mut rng = rand::rngs::StdRng::seed_from_u64(3);
        let d = random_hold_disturbance(&mut rng, &[0.1, 0.0], 0.5, 10.0).unwrap();
        assert!(d.validate(2).is_ok());
        assert!(d.bound(0) <= 0.1 && d.bound(0) > 0.0);
        assert_eq!(d.bound(1), 0.0);
        assert!(random_hold_disturbance(&mut rng, &[0.1], 0.0, 10.0).is_err());
    }

    #[test]
    fn bang_bang_follows_sign() {
        let d = DisturbanceSignal::BangBang {
            bounds: vec![0.2, 0.3],
            modes: vec![0],
        };
        assert_eq!(d.eval(0.0, &[-1.0, 5.0]), vec![-0.2, 0.0]);
        assert_eq!(d.eval(0.0, &[1.0, 5.0]), vec![0.2, 0.0]);
        assert!(d.validate(2).is_ok());
        assert!(d.validate(3).is_err());
    }

    #[test]
    fn custom_zero_order_hold() {
        let d = DisturbanceSignal::Custom {
            times: vec![1.0, 2.0],
            values: vec![vec![0.1, -0.1], vec![0.3, 0.0]],
        };
        assert!(d.validate(2).is_ok());
        assert_eq!(d.eval(0.5, &[0.0, 0.0]), vec![0.0, 0.0]);
        assert_eq!(d.eval(1.0, &[0.0, 0.0]), vec![0.1, -0.1]);
        assert_eq!(d.eval(1.9, &[0.0, 0.0]), vec![0.1, -0.1]);
        assert_eq!(d.eval(7.0, &[0.0, 0.0]), vec![0.3, 0.0]);
        assert_eq!(d.bound(0), 0.3);
        let unsorted = DisturbanceSignal::Custom {
            times: vec![2.0, 1.0],
            values: vec![vec![0.0, 0.0], vec![0.0, 0.0]],
        };
        assert!(unsorted.validate(2).is_err());
    }
}
