//! Region-of-attraction membership, per-mode fate, settling and escape times.
//!
//! Everything here assumes strictly stabilizing modal gains (`κ_r < 0`) and
//! refuses other inputs with [`Error::UnsupportedRegime`].

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::modal::{to_modal, ModeParams};
use crate::tensor::{OdecoSystem, Parity};

fn require_stabilizing(m: &ModeParams) -> Result<()> {
    if m.kappa < 0.0 {
        Ok(())
    } else {
        Err(Error::regime(
            None,
            format!("certificates require κ < 0 (got κ = {})", m.kappa),
        ))
    }
}

pub(crate) fn require_stabilizing_system(sys: &OdecoSystem) -> Result<()> {
    match sys.first_nonnegative_gain() {
        None => Ok(()),
        Some(r) => Err(Error::regime(
            Some(r),
            format!("certificates require κ < 0 (got κ = {})", sys.kappa()[r]),
        )),
    }
}

/// Nonzero modal equilibrium `c = (−κ/λ)^{1/p}` that bounds the ROA of a mode.
///
/// `None` when the mode is unconstrained (`λ = 0`, or `λ < 0` with even `p`).
/// For odd `p` the real `p`-th root is signed, so `c < 0` when `λ < 0`.
pub fn threshold(m: &ModeParams) -> Result<Option<f64>> {
    require_stabilizing(m)?;
    if m.lambda == 0.0 {
        return Ok(None);
    }
    let ratio = -m.kappa / m.lambda;
    let root = ratio.abs().powf(1.0 / m.p as f64);
    Ok(match m.parity() {
        Parity::Even if m.lambda > 0.0 => Some(root),
        Parity::Even => None,
        Parity::Odd => Some(root.copysign(ratio)),
    })
}

/// Long-run behaviour of one mode started at `y0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "fate", rename_all = "snake_case")]
pub enum ModeFate {
    ConvergesToZero,
    /// `y0` is a nonzero equilibrium; the trajectory stays there.
    BoundaryEquilibrium {
        value: f64,
    },
    EscapesPlusInfinity {
        escape_time: f64,
    },
    EscapesMinusInfinity {
        escape_time: f64,
    },
}

impl ModeFate {
    pub fn converges(&self) -> bool {
        matches!(self, ModeFate::ConvergesToZero)
    }

    pub fn escape_time(&self) -> Option<f64> {
        match *self {
            ModeFate::EscapesPlusInfinity { escape_time }
            | ModeFate::EscapesMinusInfinity { escape_time } => Some(escape_time),
            _ => None,
        }
    }
}

pub fn classify_mode_fate(m: &ModeParams, y0: f64) -> Result<ModeFate> {
    require_stabilizing(m)?;
    if m.lambda == 0.0 {
        return Ok(ModeFate::ConvergesToZero);
    }
    let margin = m.equilibrium_margin(y0);
    if margin > 0.0 {
        return Ok(ModeFate::ConvergesToZero);
    }
    if margin == 0.0 {
        return Ok(ModeFate::BoundaryEquilibrium { value: y0 });
    }
    let escape_time = escape_time_formula(m, y0);
    Ok(if y0 > 0.0 {
        ModeFate::EscapesPlusInfinity { escape_time }
    } else {
        ModeFate::EscapesMinusInfinity { escape_time }
    })
}

/// `T = ln( (λ/|κ|) / (λ/|κ| − y0^{-p}) ) / (p|κ|)`.
fn escape_time_formula(m: &ModeParams, y0: f64) -> f64 {
    let alpha = -m.kappa;
    let ratio = m.lambda / alpha;
    let inv = y0.powi(-(m.p as i32));
    // ln(L / (L − u0)) = −ln(1 − u0/L)
    -(-inv / ratio).ln_1p() / (m.p as f64 * alpha)
}

/// Finite escape time of a mode that escapes.
pub fn escape_time_mode(m: &ModeParams, y0: f64) -> Result<f64> {
    match classify_mode_fate(m, y0)? {
        ModeFate::EscapesPlusInfinity { escape_time }
        | ModeFate::EscapesMinusInfinity { escape_time } => Ok(escape_time),
        fate => Err(Error::precondition(
            None,
            format!("mode does not escape from y0 = {y0} ({fate:?})"),
        )),
    }
}

/// Time for a convergent mode to first reach `|y| ≤ eps`.
pub fn settling_time_mode(m: &ModeParams, y0: f64, eps: f64) -> Result<f64> {
    if !(eps > 0.0) || eps.is_infinite() {
        return Err(Error::InvalidArgument(format!(
            "tolerance must be positive and finite (got {eps})"
        )));
    }
    let fate = classify_mode_fate(m, y0)?;
    if !fate.converges() {
        return Err(Error::precondition(
            None,
            format!("mode does not converge from y0 = {y0} ({fate:?})"),
        ));
    }
    let abs0 = y0.abs();
    if abs0 <= eps {
        return Ok(0.0);
    }
    let alpha = -m.kappa;
    if m.lambda == 0.0 {
        return Ok((abs0 / eps).ln() / alpha);
    }
    let p = m.p as f64;
    let b = match m.parity() {
        Parity::Even => m.lambda,
        Parity::Odd => m.lambda * y0.signum(),
    };
    let shift = b / alpha;
    let num = eps.powi(-(m.p as i32)) - shift;
    let den = abs0.powi(-(m.p as i32)) - shift;
    if !(den > 0.0) {
        return Err(Error::precondition(
            None,
            format!("y0 = {y0} is numerically on the convergence boundary"),
        ));
    }
    Ok((num / den).ln() / (p * alpha))
}

/// Per-mode settling times for a state inside the ROA.
pub fn settling_times(sys: &OdecoSystem, x0: &[f64], eps: f64) -> Result<Vec<f64>> {
    let cert = roa_membership(sys, x0)?;
    if !cert.inside {
        return Err(Error::OutsideRoa {
            modes: cert.violated_modes(),
        });
    }
    cert.modes
        .iter()
        .enumerate()
        .map(|(r, rec)| settling_time_mode(&sys.mode(r), rec.y0, eps).map_err(|e| e.at_mode(r)))
        .collect()
}

/// `T_ε(x0) = max_r T_{ε,r}`; afterwards `‖x(t)‖₂ ≤ √n·ε`.
pub fn settling_time(sys: &OdecoSystem, x0: &[f64], eps: f64) -> Result<f64> {
    Ok(settling_times(sys, x0, eps)?
        .into_iter()
        .fold(0.0, f64::max))
}

/// First finite escape time over all modes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FirstEscape {
    /// Zero-based index of the mode escaping first.
    pub mode: usize,
    pub time: f64,
}

/// Per-mode escape times (`None` for modes that do not escape).
pub fn escape_times(sys: &OdecoSystem, x0: &[f64]) -> Result<Vec<Option<f64>>> {
    require_stabilizing_system(sys)?;
    let y0 = to_modal(sys, x0)?;
    y0.iter()
        .enumerate()
        .map(|(r, &y)| {
            classify_mode_fate(&sys.mode(r), y)
                .map(|f| f.escape_time())
                .map_err(|e| e.at_mode(r))
        })
        .collect()
}

/// `T_esc = min_r T_{esc,r}`, or `None` when no mode escapes.
pub fn escape_time(sys: &OdecoSystem, x0: &[f64]) -> Result<Option<FirstEscape>> {
    Ok(escape_times(sys, x0)?
        .into_iter()
        .enumerate()
        .filter_map(|(mode, t)| t.map(|time| FirstEscape { mode, time }))
        .min_by(|a, b| a.time.total_cmp(&b.time)))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConstraintKind {
    Unconstrained,
    /// `|y| < c` (even `p`, `λ > 0`).
    TwoSided,
    /// `y < c` (odd `p`, `λ > 0`).
    Below,
    /// `y > c` (odd `p`, `λ < 0`).
    Above,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeConstraint {
    /// One-based mode number.
    pub mode: usize,
    pub y0: f64,
    pub threshold: Option<f64>,
    pub kind: ConstraintKind,
    pub satisfied: bool,
    pub on_boundary: bool,
    pub fate: ModeFate,
}

/// ROA verdict for one initial state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoaCertificate {
    pub inside: bool,
    pub parity: Parity,
    /// Some mode sits exactly on its threshold.
    pub boundary: bool,
    pub modes: Vec<ModeConstraint>,
}

impl RoaCertificate {
    /// Zero-based indices of modes whose constraint fails.
    pub fn violated_modes(&self) -> Vec<usize> {
        self.modes
            .iter()
            .filter(|m| !m.satisfied)
            .map(|m| m.mode - 1)
            .collect()
    }
}

/// Exact ROA membership via the modal threshold inequalities.
///
/// Threshold points count as outside (the region is open) and set
/// [`RoaCertificate::boundary`].
pub fn roa_membership(sys: &OdecoSystem, x0: &[f64]) -> Result<RoaCertificate> {
    require_stabilizing_system(sys)?;
    let y0 = to_modal(sys, x0)?;
    let parity = sys.parity();
    let modes = y0
        .iter()
        .enumerate()
        .map(|(r, &y)| {
            let m = sys.mode(r);
            let threshold = threshold(&m).map_err(|e| e.at_mode(r))?;
            let kind = match (threshold, parity) {
                (None, _) => ConstraintKind::Unconstrained,
                (Some(_), Parity::Even) => ConstraintKind::TwoSided,
                (Some(_), Parity::Odd) if m.lambda > 0.0 => ConstraintKind::Below,
                (Some(_), Parity::Odd) => ConstraintKind::Above,
            };
            let fate = classify_mode_fate(&m, y).map_err(|e| e.at_mode(r))?;
            Ok(ModeConstraint {
                mode: r + 1,
                y0: y,
                threshold,
                kind,
                satisfied: fate.converges(),
                on_boundary: matches!(fate, ModeFate::BoundaryEquilibrium { .. }),
                fate,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(RoaCertificate {
        inside: modes.iter().all(|m| m.satisfied),
        parity,
        boundary: modes.iter().any(|m| m.on_boundary),
        modes,
    })
}
