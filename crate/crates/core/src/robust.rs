//! Robust invariance and ISS-type bounds for even `p` under matched disturbances.
//!
//! With `ẏ_r = κ_r y_r + λ_r y_r^{p+1} + d_r(t)` and `|d_r| ≤ d̄_r`, every bound
//! comes from the roots of `φ(s) = λs^{p+1} + κs + d̄`.

use serde::{Deserialize, Serialize};

use crate::certify::require_stabilizing_system;
use crate::error::{Error, Result};
use crate::modal::{to_modal, ModeParams};
use crate::roots::bisect;
use crate::tensor::{OdecoSystem, Parity};

/// Disturbances within this distance of `d̄_max` trigger a certificate warning.
pub const DEGENERATE_MARGIN: f64 = 1e-9;

fn require_even(m: &ModeParams) -> Result<()> {
    if m.parity() == Parity::Even {
        Ok(())
    } else {
        Err(Error::regime(
            None,
            "robust bounds are developed for even p only",
        ))
    }
}

fn require_destabilizing(m: &ModeParams) -> Result<()> {
    require_even(m)?;
    if !(m.kappa < 0.0) {
        return Err(Error::regime(
            None,
            format!("requires κ < 0 (got {})", m.kappa),
        ));
    }
    if !(m.lambda > 0.0) {
        return Err(Error::regime(
            None,
            format!("requires λ > 0 (got {}); use hat_threshold", m.lambda),
        ));
    }
    Ok(())
}

fn check_dbar(dbar: f64) -> Result<()> {
    if dbar >= 0.0 && dbar.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!(
            "disturbance bound must be finite and nonnegative (got {dbar})"
        )))
    }
}

fn phi(m: &ModeParams, dbar: f64) -> impl Fn(f64) -> f64 + '_ {
    move |s| m.lambda * s.powi(m.p as i32 + 1) + m.kappa * s + dbar
}

/// Maximizer `s* = (−κ/((p+1)λ))^{1/p}` of `−κs − λs^{p+1}` on `[0, c*]`.
pub fn dbar_max_argmax(m: &ModeParams) -> Result<f64> {
    require_destabilizing(m)?;
    let p = m.p as f64;
    Ok((-m.kappa / ((p + 1.0) * m.lambda)).powf(1.0 / p))
}

/// Largest tolerable disturbance bound for a mode with `λ > 0`.
pub fn dbar_max(m: &ModeParams) -> Result<f64> {
    let s = dbar_max_argmax(m)?;
    let p = m.p as f64;
    // −κs* − λs*^{p+1} = |κ|·s*·p/(p+1) at the stationary point
    Ok(-m.kappa * s * p / (p + 1.0))
}

/// Smallest positive root `c̃` of `λs^{p+1} + κs + d̄ = 0` (mode with `λ > 0`).
pub fn robust_threshold(m: &ModeParams, dbar: f64) -> Result<f64> {
    require_destabilizing(m)?;
    check_dbar(dbar)?;
    if dbar == 0.0 {
        return Ok(0.0);
    }
    let limit = dbar_max(m)?;
    if dbar >= limit {
        return Err(Error::InfeasibleDisturbance { modes: vec![] });
    }
    // φ decreases on [0, s*] from d̄ > 0 to d̄ − d̄_max < 0
    let s_star = dbar_max_argmax(m)?;
    bisect(phi(m, dbar), 0.0, s_star)
}

/// Unique nonnegative root `ĉ` of `λs^{p+1} + κs + d̄ = 0` (mode with `λ ≤ 0`).
pub fn hat_threshold(m: &ModeParams, dbar: f64) -> Result<f64> {
    require_even(m)?;
    if !(m.kappa < 0.0) {
        return Err(Error::regime(
            None,
            format!("requires κ < 0 (got {})", m.kappa),
        ));
    }
    if m.lambda > 0.0 {
        return Err(Error::regime(
            None,
            format!("requires λ ≤ 0 (got {}); use robust_threshold", m.lambda),
        ));
    }
    check_dbar(dbar)?;
    let linear = dbar / -m.kappa;
    if m.lambda == 0.0 || dbar == 0.0 {
        return Ok(linear);
    }
    bisect(phi(m, dbar), 0.0, linear)
}

/// `|y(t)| ≤ e^{−αt}|y0| + (1 − e^{−αt})/α · sup|d|`.
pub fn iss_envelope(alpha: f64, y0_abs: f64, d_sup: f64, t: f64) -> Result<f64> {
    if !(alpha > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "envelope rate must be positive (got {alpha})"
        )));
    }
    if !(t >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "time must be nonnegative (got {t})"
        )));
    }
    let decay = (-alpha * t).exp();
    let rise = -(-alpha * t).exp_m1();
    Ok(decay * y0_abs + rise / alpha * d_sup)
}

/// Per-mode disturbance bounds `d̄_r ≥ 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DisturbanceEnvelope {
    bounds: Vec<f64>,
}

impl DisturbanceEnvelope {
    pub fn new(bounds: Vec<f64>) -> Result<Self> {
        bounds.iter().try_for_each(|&d| check_dbar(d))?;
        Ok(Self { bounds })
    }

    pub fn uniform(n: usize, dbar: f64) -> Result<Self> {
        Self::new(vec![dbar; n])
    }

    pub fn bounds(&self) -> &[f64] {
        &self.bounds
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ThresholdKind {
    /// `c̃`: smallest root below the undisturbed threshold (`λ > 0`).
    Robust,
    /// `ĉ`: unique nonnegative root (`λ ≤ 0`).
    Hat,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobustMode {
    /// One-based mode number.
    pub mode: usize,
    pub dbar: f64,
    pub kind: ThresholdKind,
    /// Ultimate bound `c̄_r` (equal to `c̃_r` or `ĉ_r`).
    pub bound: f64,
    /// Undisturbed threshold `c_r` for `λ > 0` modes.
    pub threshold: Option<f64>,
    pub dbar_max: Option<f64>,
    /// Envelope rate `α_r = −(κ_r + max(λ_r, 0)·c̄_r^p)`.
    pub alpha: f64,
    /// Slope of the linear ISS gain, `c̄_r / d̄_r`; `None` when `d̄_r = 0`.
    pub gain_slope: Option<f64>,
}

impl RobustMode {
    /// `γ_r(s) = c̄_r · s / d̄_r`; returns `c̄_r` exactly at `s = d̄_r`.
    pub fn gain(&self, s: f64) -> Option<f64> {
        (self.dbar > 0.0).then(|| self.bound * (s / self.dbar))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobustCertificate {
    pub modes: Vec<RobustMode>,
    /// Every `d̄_r` is zero; bounds collapse to the origin and gains are undefined.
    pub zero_disturbance: bool,
    pub warnings: Vec<String>,
}

impl RobustCertificate {
    pub fn bounds(&self) -> Vec<f64> {
        self.modes.iter().map(|m| m.bound).collect()
    }
}

pub fn robust_certificate(
    sys: &OdecoSystem,
    env: &DisturbanceEnvelope,
) -> Result<RobustCertificate> {
    if sys.parity() != Parity::Even {
        return Err(Error::regime(
            None,
            "robust bounds are developed for even p only",
        ));
    }
    require_stabilizing_system(sys)?;
    if env.bounds.len() != sys.dim() {
        return Err(Error::DimensionMismatch {
            expected: sys.dim(),
            got: env.bounds.len(),
        });
    }
    let infeasible: Vec<usize> = (0..sys.dim())
        .filter(|&r| {
            let m = sys.mode(r);
            m.lambda > 0.0 && dbar_max(&m).map_or(true, |lim| env.bounds[r] >= lim)
        })
        .collect();
    if !infeasible.is_empty() {
        return Err(Error::InfeasibleDisturbance { modes: infeasible });
    }

    let mut warnings = Vec::new();
    let modes = (0..sys.dim())
        .map(|r| -> Result<RobustMode> {
            let m = sys.mode(r);
            let dbar = env.bounds[r];
            let (kind, bound, threshold, limit) = if m.lambda > 0.0 {
                let limit = dbar_max(&m)?;
                if limit - dbar <= DEGENERATE_MARGIN {
                    warnings.push(format!(
                        "mode {}: d̄ = {dbar} is within {DEGENERATE_MARGIN:e} of d̄_max = {limit}; \
                         the robust threshold approaches a double root and invariance margins vanish",
                        r + 1
                    ));
                }
                let c = (-m.kappa / m.lambda).powf(1.0 / m.p as f64);
                (
                    ThresholdKind::Robust,
                    robust_threshold(&m, dbar).map_err(|e| e.at_mode(r))?,
                    Some(c),
                    Some(limit),
                )
            } else {
                (ThresholdKind::Hat, hat_threshold(&m, dbar).map_err(|e| e.at_mode(r))?, None, None)
            };
            let alpha = -(m.kappa + m.lambda.max(0.0) * m.pow_p(bound));
            Ok(RobustMode {
                mode: r + 1,
                dbar,
                kind,
                bound,
                threshold,
                dbar_max: limit,
                alpha,
                gain_slope: (dbar > 0.0).then(|| bound / dbar),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(RobustCertificate {
        zero_disturbance: env.bounds.iter().all(|&d| d == 0.0),
        modes,
        warnings,
    })
}

/// `|v_rᵀx0| < c̃_r` for every mode with `λ_r > 0`.
pub fn robust_set_membership(
    sys: &OdecoSystem,
    env: &DisturbanceEnvelope,
    x0: &[f64],
) -> Result<bool> {
    let cert = robust_certificate(sys, env)?;
    let y0 = to_modal(sys, x0)?;
    Ok(cert
        .modes
        .iter()
        .zip(&y0)
        .filter(|(m, _)| m.kind == ThresholdKind::Robust)
        .all(|(m, y)| y.abs() < m.bound))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::modal::from_modal;
    use crate::tensor::rotation_basis;
    use std::f64::consts::PI;

    fn mode(kappa: f64, lambda: f64, p: u32) -> ModeParams {
        ModeParams::new(kappa, lambda, p).unwrap()
    }

    fn example() -> OdecoSystem {
        OdecoSystem::new(
            4,
            rotation_basis(PI / 6.0),
            vec![1.0, -0.5],
            vec![-1.0, -1.0],
        )
        .unwrap()
    }

    #[test]
    fn dbar_max_values() {
        let d = dbar_max(&mode(-1.0, 1.0, 2)).unwrap();
        assert!((d - 2.0 / (3.0 * 3f64.sqrt())).abs() < 1e-15);
        let d2 = dbar_max(&mode(-2.0, 1.0, 2)).unwrap();
        assert!((d2 - 2.0 * 2f64.powf(1.5) / (3.0 * 3f64.sqrt())).abs() < 1e-14);
        assert!(dbar_max(&mode(-1.0, 1.0, 1)).is_err());
        assert!(dbar_max(&mode(-1.0, -1.0, 2)).is_err());
    }

    #[test]
    fn thresholds_and_edges() {
        let m = mode(-1.0, 1.0, 2);
        let c = robust_threshold(&m, 0.15).unwrap();
        assert!((c.powi(3) - c + 0.15).abs() <= 1e-12);
        assert!((c - 0.15362).abs() < 1e-5);
        assert_eq!(robust_threshold(&m, 0.0).unwrap(), 0.0);
        assert!(matches!(
            robust_threshold(&m, 0.4),
            Err(Error::InfeasibleDisturbance { .. })
        ));
        let tiny = robust_threshold(&m, 1e-9).unwrap();
        assert!((tiny - 1e-9).abs() < 1e-15);

        let h = hat_threshold(&mode(-1.0, 0.0, 2), 0.15).unwrap();
        assert_eq!(h, 0.15);
        let h = hat_threshold(&mode(-1.0, -0.5, 2), 0.15).unwrap();
        assert!((-0.5 * h.powi(3) - h + 0.15).abs() <= 1e-12);
        assert_eq!(hat_threshold(&mode(-1.0, -0.5, 2), 0.0).unwrap(), 0.0);
        assert!(hat_threshold(&mode(-1.0, 0.5, 2), 0.1).is_err());
    }

    #[test]
    fn envelope() {
        assert_eq!(iss_envelope(0.9764, 0.3, 0.15, 0.0).unwrap(), 0.3);
        let far = iss_envelope(0.9764, 0.3, 0.15, 1e3).unwrap();
        assert!((far - 0.15 / 0.9764).abs() < 1e-15);
        let pure = iss_envelope(2.0, 0.3, 0.0, 1.5).unwrap();
        assert!((pure - 0.3 * (-3.0f64).exp()).abs() < 1e-16);
        assert!(iss_envelope(0.0, 1.0, 0.1, 1.0).is_err());
    }

    #[test]
    fn example_certificate() {
        let sys = example();
        let cert =
            robust_certificate(&sys, &DisturbanceEnvelope::uniform(2, 0.15).unwrap()).unwrap();
        let c1 = cert.modes[0].bound;
        assert!((c1 - 0.15362).abs() < 1e-5);
        assert!((cert.modes[1].bound - 0.148_367_02).abs() < 1e-7);
        assert!((cert.modes[0].alpha - (1.0 - c1 * c1)).abs() < 1e-15);
        assert_eq!(cert.modes[1].alpha, 1.0);
        assert_eq!(cert.modes[0].gain(0.15), Some(c1));
        assert!((cert.modes[0].gain(0.075).unwrap() - 0.5 * c1).abs() < 1e-16);
        assert!(cert.warnings.is_empty());
        assert!(!cert.zero_disturbance);

        let zero =
            robust_certificate(&sys, &DisturbanceEnvelope::uniform(2, 0.0).unwrap()).unwrap();
        assert!(zero.zero_disturbance);
        assert_eq!(zero.bounds(), vec![0.0, 0.0]);
        assert_eq!(zero.modes[0].gain_slope, None);
    }

    #[test]
    fn infeasible_lists_modes() {
        let sys = example();
        let env = DisturbanceEnvelope::new(vec![0.4, 0.4]).unwrap();
        assert_eq!(
            robust_certificate(&sys, &env),
            Err(Error::InfeasibleDisturbance { modes: vec![0] })
        );
    }

    #[test]
    fn near_degenerate_warns() {
        let sys = example();
        let limit = dbar_max(&sys.mode(0)).unwrap();
        let env = DisturbanceEnvelope::new(vec![limit - 1e-12, 0.1]).unwrap();
        let cert = robust_certificate(&sys, &env).unwrap();
        assert_eq!(cert.warnings.len(), 1);
        let s_star = 1.0 / 3f64.sqrt();
        assert!((cert.modes[0].bound - s_star).abs() < 1e-5);
    }

    #[test]
    fn odd_degree_refused() {
        let sys =
            OdecoSystem::new(3, rotation_basis(0.3), vec![1.0, -0.5], vec![-1.0, -1.0]).unwrap();
        assert!(matches!(
            robust_certificate(&sys, &DisturbanceEnvelope::uniform(2, 0.1).unwrap()),
            Err(Error::UnsupportedRegime { .. })
        ));
    }

    #[test]
    fn membership() {
        let sys = example();
        let env = DisturbanceEnvelope::uniform(2, 0.15).unwrap();
        assert!(robust_set_membership(&sys, &env, &[0.0, 0.0]).unwrap());
        let x = from_modal(&sys, &[0.2, 0.0]).unwrap();
        assert!(!robust_set_membership(&sys, &env, &x).unwrap());
        let x = from_modal(&sys, &[0.0, 10.0]).unwrap();
        assert!(robust_set_membership(&sys, &env, &x).unwrap());
    }
}
