//! Modal coordinates and exact per-mode trajectories.
//!
//! Under shared-basis feedback each modal coordinate `y_r = v_rᵀx` obeys the
//! scalar Bernoulli equation `ẏ = κy + λy^{p+1}`. With `u = y^{-p}` this is
//! linear, which gives
//!
//! ```text
//! y(t) = y0 · B(t)^{-1/p},   B(t) = e^{-pκt} − (λ/κ)·y0^p·(1 − e^{-pκt})
//! ```
//!
//! and `B(t) = 1 − pλ·y0^p·t` when `κ = 0`. The formula holds while `B > 0`.

use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::tensor::{dot, OdecoSystem, Parity};

/// Gains with `|κ|` below this use the `κ = 0` bracket.
pub const KAPPA_ZERO_TOL: f64 = 1e-14;

/// Initial modal values with `|y0|` below this are treated as exactly zero.
pub const Y0_ZERO_TOL: f64 = 1e-300;

/// One decoupled mode: `ẏ = κy + λy^{p+1}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModeParams {
    pub kappa: f64,
    pub lambda: f64,
    pub p: u32,
}

impl ModeParams {
    pub fn new(kappa: f64, lambda: f64, p: u32) -> Result<Self> {
        if p < 1 {
            return Err(Error::InvalidArgument(
                "mode exponent p must be at least 1".into(),
            ));
        }
        if !kappa.is_finite() || !lambda.is_finite() {
            return Err(Error::InvalidArgument("κ and λ must be finite".into()));
        }
        Ok(Self { kappa, lambda, p })
    }

    pub fn parity(&self) -> Parity {
        Parity::of(self.p)
    }

    /// `y^p` as a signed integer power.
    #[inline]
    pub fn pow_p(&self, y: f64) -> f64 {
        y.powi(self.p as i32)
    }

    /// Right-hand side `κy + λy^{p+1}`.
    #[inline]
    pub fn drift(&self, y: f64) -> f64 {
        self.kappa * y + self.lambda * y.powi(self.p as i32 + 1)
    }

    fn linear_gain_is_zero(&self) -> bool {
        self.kappa.abs() < KAPPA_ZERO_TOL
    }

    /// `1 + (λ/κ)·y0^p`, the coefficient of `e^{-pκt} − 1` in the bracket.
    ///
    /// For `κ < 0` its sign decides the fate of the mode: positive converges,
    /// zero sits on a nonzero equilibrium, negative escapes in finite time.
    pub fn equilibrium_margin(&self, y0: f64) -> f64 {
        1.0 + (self.lambda / self.kappa) * self.pow_p(y0)
    }

    /// Closed-form bracket `B(t)`; `y(t) = y0·B(t)^{-1/p}` while `B > 0`.
    pub fn bracket(&self, y0: f64, t: f64) -> f64 {
        let p = self.p as f64;
        if self.linear_gain_is_zero() {
            return 1.0 - p * self.lambda * self.pow_p(y0) * t;
        }
        let margin = self.equilibrium_margin(y0);
        if margin == 0.0 {
            return 1.0;
        }
        1.0 + margin * (-p * self.kappa * t).exp_m1()
    }
}

/// Closed-form solution of one mode from a fixed initial value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModeSolution {
    pub params: ModeParams,
    pub y0: f64,
    /// End of the validity interval; `f64::INFINITY` when the mode never escapes.
    pub horizon: f64,
}

impl ModeSolution {
    pub fn new(params: ModeParams, y0: f64) -> Self {
        Self {
            params,
            y0,
            horizon: mode_horizon(&params, y0),
        }
    }

    pub fn value_at(&self, t: f64) -> Result<f64> {
        evaluate(&self.params, self.y0, t, self.horizon)
    }
}

/// Supremum of times for which the closed-form bracket stays positive.
pub fn mode_horizon(m: &ModeParams, y0: f64) -> f64 {
    if y0.abs() < Y0_ZERO_TOL {
        return f64::INFINITY;
    }
    let p = m.p as f64;
    if m.linear_gain_is_zero() {
        let rate = p * m.lambda * m.pow_p(y0);
        return if rate > 0.0 {
            1.0 / rate
        } else {
            f64::INFINITY
        };
    }
    let margin = m.equilibrium_margin(y0);
    // B(t) = 1 + margin·(e^{-pκt} − 1) reaches zero at e^{-pκt} = 1 − 1/margin
    let reachable = if m.kappa < 0.0 {
        margin < 0.0
    } else {
        margin > 1.0
    };
    if !reachable {
        return f64::INFINITY;
    }
    (-1.0 / margin).ln_1p() / (-p * m.kappa)
}

/// `y(t)` for `ẏ = κy + λy^{p+1}`, `y(0) = y0`.
///
/// Fails with [`Error::BeyondHorizon`] when `t` is at or past [`mode_horizon`].
pub fn mode_value(m: &ModeParams, y0: f64, t: f64) -> Result<f64> {
    evaluate(m, y0, t, mode_horizon(m, y0))
}

fn evaluate(m: &ModeParams, y0: f64, t: f64, horizon: f64) -> Result<f64> {
    if !(t >= 0.0) || t.is_infinite() {
        return Err(Error::InvalidArgument(format!(
            "time must be finite and nonnegative (got {t})"
        )));
    }
    if y0.abs() < Y0_ZERO_TOL {
        return Ok(0.0);
    }
    if t >= horizon {
        return Err(Error::BeyondHorizon {
            mode: 0,
            t,
            horizon,
        });
    }
    let bracket = m.bracket(y0, t);
    if !(bracket > 0.0) {
        return Err(Error::BeyondHorizon {
            mode: 0,
            t,
            horizon,
        });
    }
    // |B|^{-1/p} times the signed prefactor keeps the real branch with sign(y0)
    Ok(y0 * bracket.powf(-1.0 / m.p as f64))
}

/// `y = Vᵀx`.
pub fn to_modal(sys: &OdecoSystem, x: &[f64]) -> Result<Vec<f64>> {
    check_dim(sys.dim(), x.len())?;
    Ok(sys.basis().iter().map(|v| dot(v, x)).collect())
}

/// `x = V y = Σ y_r v_r`.
pub fn from_modal(sys: &OdecoSystem, y: &[f64]) -> Result<Vec<f64>> {
    check_dim(sys.dim(), y.len())?;
    let mut x = vec![0.0; sys.dim()];
    for (v, &yr) in sys.basis().iter().zip(y) {
        x.iter_mut().zip(v).for_each(|(xi, vi)| *xi += yr * vi);
    }
    Ok(x)
}

/// Full state at time `t` from the per-mode closed forms.
pub fn closed_form_state(sys: &OdecoSystem, x0: &[f64], t: f64) -> Result<Vec<f64>> {
    let y0 = to_modal(sys, x0)?;
    let y = y0
        .iter()
        .enumerate()
        .map(|(r, &y0r)| mode_value(&sys.mode(r), y0r, t).map_err(|e| e.at_mode(r)))
        .collect::<Result<Vec<_>>>()?;
    from_modal(sys, &y)
}

/// Earliest modal horizon and the mode attaining it.
pub fn state_horizon(sys: &OdecoSystem, x0: &[f64]) -> Result<(f64, Option<usize>)> {
    let y0 = to_modal(sys, x0)?;
    let mut best = (f64::INFINITY, None);
    for (r, &y0r) in y0.iter().enumerate() {
        let h = mode_horizon(&sys.mode(r), y0r);
        if h < best.0 {
            best = (h, Some(r));
        }
    }
    Ok(best)
}
