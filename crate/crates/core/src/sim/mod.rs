//! Fixed-step RK4 oracle for the closed loop, independent of the closed forms.
//!
//! The integrator works on `ẋ = Kx + 𝒜x^{k−1} + Σ_r d_r(t) v_r` in state
//! coordinates through [`OdecoSystem::vector_field_into`]. Blow-up is declared
//! once `‖Vᵀx‖∞` exceeds a threshold; the offending step is then re-integrated
//! with successively halved substeps to localize the crossing to `dt/128`.

pub mod basin;
pub mod disturbance;

use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::tensor::{dot, OdecoSystem};

pub use basin::{
    basin_grid, BasinCell, BasinGrid, BasinLabel, BasinSettings, BasinStats, BoundaryLine, GridSpec,
};
pub use disturbance::{
    make_paper_disturbance, random_hold_disturbance, sinusoid_disturbance, DisturbanceSignal,
    SinusoidProfile,
};

pub const DEFAULT_DT: f64 = 1e-3;
pub const DEFAULT_T_END: f64 = 30.0;
pub const DEFAULT_BLOWUP_THRESHOLD: f64 = 1e8;

/// Refinement stops once the substep is at most `dt / REFINE_DIVISOR`.
const REFINE_DIVISOR: f64 = 100.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntegrationOptions {
    pub dt: f64,
    pub t_end: f64,
    pub blowup_threshold: f64,
}

impl Default for IntegrationOptions {
    fn default() -> Self {
        Self {
            dt: DEFAULT_DT,
            t_end: DEFAULT_T_END,
            blowup_threshold: DEFAULT_BLOWUP_THRESHOLD,
        }
    }
}

impl IntegrationOptions {
    pub fn new(dt: f64, t_end: f64) -> Self {
        Self {
            dt,
            t_end,
            ..Self::default()
        }
    }

    pub fn with_threshold(mut self, threshold: f64) -> Self {
        self.blowup_threshold = threshold;
        self
    }

    fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "dt must be positive (got {})",
                self.dt
            )));
        }
        if !(self.t_end >= 0.0 && self.t_end.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "t_end must be finite and nonnegative (got {})",
                self.t_end
            )));
        }
        if !(self.blowup_threshold > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "blow-up threshold must be positive (got {})",
                self.blowup_threshold
            )));
        }
        Ok(())
    }

    /// Number of steps; the grid is `t_i = i·dt`, `i = 0..=steps`.
    pub fn steps(&self) -> usize {
        (self.t_end / self.dt).round() as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum Termination {
    Completed,
    /// An observer asked to stop at this sample time.
    Stopped {
        time: f64,
    },
    /// `‖y‖∞` crossed the threshold at `time` (zero-based `mode` was largest).
    BlewUp {
        time: f64,
        mode: usize,
    },
}

/// Uniformly sampled oracle run.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub dt: f64,
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
    pub modal: Vec<Vec<f64>>,
    pub termination: Termination,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn blew_up(&self) -> bool {
        matches!(self.termination, Termination::BlewUp { .. })
    }

    pub fn blowup_time(&self) -> Option<f64> {
        match self.termination {
            Termination::BlewUp { time, .. } => Some(time),
            _ => None,
        }
    }

    /// Modal series `y_r(t_i)` of one mode.
    pub fn mode_series(&self, r: usize) -> Vec<f64> {
        self.modal.iter().map(|y| y[r]).collect()
    }
}

/// What an observer wants after seeing a sample.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Flow {
    Continue,
    Stop,
}

/// Right-hand side in some coordinates, plus the map to modal coordinates.
trait Dynamics {
    fn dim(&self) -> usize;
    fn modal_into(&self, z: &[f64], y: &mut [f64]);
    fn rhs_into(&self, t: f64, z: &[f64], scratch: &mut Scratch, out: &mut [f64]);
}

struct Scratch {
    y: Vec<f64>,
    d: Vec<f64>,
}

struct StateDynamics<'a> {
    sys: &'a OdecoSystem,
    disturbance: &'a DisturbanceSignal,
}

impl Dynamics for StateDynamics<'_> {
    fn dim(&self) -> usize {
        self.sys.dim()
    }

    fn modal_into(&self, z: &[f64], y: &mut [f64]) {
        for (yr, v) in y.iter_mut().zip(self.sys.basis()) {
            *yr = dot(v, z);
        }
    }

    fn rhs_into(&self, t: f64, z: &[f64], scratch: &mut Scratch, out: &mut [f64]) {
        self.sys.vector_field_into(z, out);
        if matches!(self.disturbance, DisturbanceSignal::None) {
            return;
        }
        self.modal_into(z, &mut scratch.y);
        self.disturbance.eval_into(t, &scratch.y, &mut scratch.d);
        for (v, &dr) in self.sys.basis().iter().zip(&scratch.d) {
            if dr != 0.0 {
                out.iter_mut().zip(v).for_each(|(o, vi)| *o += dr * vi);
            }
        }
    }
}

/// The decoupled scalar equations `ẏ_r = κ_r y_r + λ_r y_r^{p+1} + d_r(t)`.
struct ModalDynamics<'a> {
    sys: &'a OdecoSystem,
    disturbance: &'a DisturbanceSignal,
}

impl Dynamics for ModalDynamics<'_> {
    fn dim(&self) -> usize {
        self.sys.dim()
    }

    fn modal_into(&self, z: &[f64], y: &mut [f64]) {
        y.copy_from_slice(z);
    }

    fn rhs_into(&self, t: f64, z: &[f64], scratch: &mut Scratch, out: &mut [f64]) {
        self.disturbance.eval_into(t, z, &mut scratch.d);
        for r in 0..z.len() {
            out[r] = self.sys.mode(r).drift(z[r]) + scratch.d[r];
        }
    }
}

struct Rk4<D: Dynamics> {
    dynamics: D,
    k: [Vec<f64>; 4],
    tmp: Vec<f64>,
    scratch: Scratch,
}

impl<D: Dynamics> Rk4<D> {
    fn new(dynamics: D) -> Self {
        let n = dynamics.dim();
        Self {
            dynamics,
            k: [vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n]],
            tmp: vec![0.0; n],
            scratch: Scratch {
                y: vec![0.0; n],
                d: vec![0.0; n],
            },
        }
    }

    /// One classic RK4 step of size `h` from `(t, z)` into `out`.
    fn step(&mut self, t: f64, z: &[f64], h: f64, out: &mut [f64]) {
        let n = z.len();
        let [k1, k2, k3, k4] = &mut self.k;
        self.dynamics.rhs_into(t, z, &mut self.scratch, k1);
        for i in 0..n {
            self.tmp[i] = z[i] + 0.5 * h * k1[i];
        }
        self.dynamics
            .rhs_into(t + 0.5 * h, &self.tmp, &mut self.scratch, k2);
        for i in 0..n {
            self.tmp[i] = z[i] + 0.5 * h * k2[i];
        }
        self.dynamics
            .rhs_into(t + 0.5 * h, &self.tmp, &mut self.scratch, k3);
        for i in 0..n {
            self.tmp[i] = z[i] + h * k3[i];
        }
        self.dynamics
            .rhs_into(t + h, &self.tmp, &mut self.scratch, k4);
        for i in 0..n {
            out[i] = z[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
    }
}

/// Index of the first non-finite or over-threshold modal entry, if any.
fn exceeds(y: &[f64], threshold: f64) -> Option<usize> {
    if let Some(r) = y.iter().position(|v| !v.is_finite()) {
        return Some(r);
    }
    let (r, max) = y.iter().enumerate().fold((0, 0.0f64), |acc, (r, v)| {
        if v.abs() > acc.1 {
            (r, v.abs())
        } else {
            acc
        }
    });
    (max > threshold).then_some(r)
}

enum StepOutcome {
    Accepted,
    BlewUp { time: f64, mode: usize },
}

fn run<D, F>(
    dynamics: D,
    z0: &[f64],
    opts: &IntegrationOptions,
    mut observer: F,
) -> Result<Termination>
where
    D: Dynamics,
    F: FnMut(f64, &[f64], &[f64]) -> Flow,
{
    opts.validate()?;
    check_dim(dynamics.dim(), z0.len())?;
    if z0.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument(
            "initial state must be finite".into(),
        ));
    }
    let n = z0.len();
    let mut rk = Rk4::new(dynamics);
    let mut z = z0.to_vec();
    let mut next = vec![0.0; n];
    let mut y = vec![0.0; n];

    rk.dynamics.modal_into(&z, &mut y);
    if let Some(mode) = exceeds(&y, opts.blowup_threshold) {
        return Ok(Termination::BlewUp { time: 0.0, mode });
    }
    if observer(0.0, &z, &y) == Flow::Stop {
        return Ok(Termination::Stopped { time: 0.0 });
    }

    for i in 1..=opts.steps() {
        let t_prev = (i - 1) as f64 * opts.dt;
        let t = i as f64 * opts.dt;
        rk.step(t_prev, &z, opts.dt, &mut next);
        rk.dynamics.modal_into(&next, &mut y);
        if exceeds(&y, opts.blowup_threshold).is_some() {
            match refine(&mut rk, &z, t_prev, opts, &mut next) {
                StepOutcome::BlewUp { time, mode } => {
                    return Ok(Termination::BlewUp { time, mode });
                }
                StepOutcome::Accepted => rk.dynamics.modal_into(&next, &mut y),
            }
        }
        std::mem::swap(&mut z, &mut next);
        if observer(t, &z, &y) == Flow::Stop {
            return Ok(Termination::Stopped { time: t });
        }
    }
    Ok(Termination::Completed)
}

/// Re-integrate a step that crossed the threshold with halved substeps.
///
/// On a confirmed crossing returns the end of the finest substep that
/// crosses. If the finer integration stays below threshold its end state is
/// written to `out` and the step is accepted.
fn refine<D: Dynamics>(
    rk: &mut Rk4<D>,
    start: &[f64],
    t_start: f64,
    opts: &IntegrationOptions,
    out: &mut [f64],
) -> StepOutcome {
    let n = start.len();
    let mut base = start.to_vec();
    let mut t0 = t_start;
    let mut h = opts.dt;
    let mut mid = vec![0.0; n];
    let mut end = vec![0.0; n];
    let mut y = vec![0.0; n];
    let mut confirmed = false;
    while h > opts.dt / REFINE_DIVISOR {
        let half = 0.5 * h;
        rk.step(t0, &base, half, &mut mid);
        rk.dynamics.modal_into(&mid, &mut y);
        if exceeds(&y, opts.blowup_threshold).is_some() {
            h = half;
            confirmed = true;
            continue;
        }
        rk.step(t0 + half, &mid, half, &mut end);
        rk.dynamics.modal_into(&end, &mut y);
        if exceeds(&y, opts.blowup_threshold).is_some() {
            base.copy_from_slice(&mid);
            t0 += half;
            h = half;
            confirmed = true;
            continue;
        }
        if !confirmed {
            out.copy_from_slice(&end);
            return StepOutcome::Accepted;
        }
        // a finer split of a confirmed interval no longer crosses: stop here
        break;
    }
    rk.step(t0, &base, h, &mut end);
    rk.dynamics.modal_into(&end, &mut y);
    let mode = exceeds(&y, opts.blowup_threshold).unwrap_or_else(|| {
        y.iter()
            .enumerate()
            .fold(
                (0, -1.0),
                |acc, (r, v)| if v.abs() > acc.1 { (r, v.abs()) } else { acc },
            )
            .0
    });
    StepOutcome::BlewUp { time: t0 + h, mode }
}

/// Integrate the closed loop with an optional matched disturbance.
pub fn integrate(
    sys: &OdecoSystem,
    x0: &[f64],
    opts: &IntegrationOptions,
    disturbance: &DisturbanceSignal,
) -> Result<Trajectory> {
    disturbance.validate(sys.dim())?;
    let mut traj = empty_trajectory(opts);
    let termination = run(StateDynamics { sys, disturbance }, x0, opts, |t, x, y| {
        traj.times.push(t);
        traj.states.push(x.to_vec());
        traj.modal.push(y.to_vec());
        Flow::Continue
    })?;
    traj.termination = termination;
    Ok(traj)
}

/// Integrate the decoupled modal equations directly from `y0`.
///
/// States are reconstructed as `x = Vy`; used to cross-check [`integrate`].
pub fn integrate_modal(
    sys: &OdecoSystem,
    y0: &[f64],
    opts: &IntegrationOptions,
    disturbance: &DisturbanceSignal,
) -> Result<Trajectory> {
    disturbance.validate(sys.dim())?;
    let mut traj = empty_trajectory(opts);
    let termination = run(ModalDynamics { sys, disturbance }, y0, opts, |t, _z, y| {
        traj.times.push(t);
        traj.modal.push(y.to_vec());
        Flow::Continue
    })?;
    traj.states = traj
        .modal
        .iter()
        .map(|y| crate::modal::from_modal(sys, y))
        .collect::<Result<_>>()?;
    traj.termination = termination;
    Ok(traj)
}

/// Integrate without recording, handing every sample to `observer`.
pub fn integrate_with<F>(
    sys: &OdecoSystem,
    x0: &[f64],
    opts: &IntegrationOptions,
    disturbance: &DisturbanceSignal,
    observer: F,
) -> Result<Termination>
where
    F: FnMut(f64, &[f64], &[f64]) -> Flow,
{
    disturbance.validate(sys.dim())?;
    run(StateDynamics { sys, disturbance }, x0, opts, observer)
}

fn empty_trajectory(opts: &IntegrationOptions) -> Trajectory {
    let cap = opts.steps().saturating_add(1).min(10_000_000);
    Trajectory {
        dt: opts.dt,
        times: Vec::with_capacity(cap),
        states: Vec::with_capacity(cap),
        modal: Vec::with_capacity(cap),
        termination: Termination::Completed,
    }
}

/// First time each mode reaches `|y_r| ≤ eps`, linearly interpolated between samples.
pub fn measure_hitting_time(traj: &Trajectory, eps: f64) -> Result<Vec<Option<f64>>> {
    if !(eps > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "tolerance must be positive (got {eps})"
        )));
    }
    let Some(first) = traj.modal.first() else {
        return Ok(Vec::new());
    };
    Ok((0..first.len())
        .map(|r| {
            let mut prev: Option<(f64, f64)> = None;
            for (&t, y) in traj.times.iter().zip(&traj.modal) {
                let a = y[r].abs();
                if a <= eps {
                    return Some(match prev {
                        Some((tp, ap)) if ap > a => tp + (ap - eps) / (ap - a) * (t - tp),
                        _ => t,
                    });
                }
                prev = Some((t, a));
            }
            None
        })
        .collect())
}

/// Per-mode `sup |y_r(t_i)|` over samples with `t_i ∈ [t_a, t_b]`.
pub fn measure_ultimate_magnitude(traj: &Trajectory, window: (f64, f64)) -> Result<Vec<f64>> {
    let (ta, tb) = window;
    if traj.termination != Termination::Completed {
        return Err(Error::precondition(
            None,
            format!("trajectory did not complete ({:?})", traj.termination),
        ));
    }
    let span = traj.times.last().copied().unwrap_or(0.0);
    let slack = 1e-9 * traj.dt;
    if !(ta <= tb && ta >= -slack && tb <= span + slack) {
        return Err(Error::InvalidArgument(format!(
            "window [{ta}, {tb}] is outside the trajectory span [0, {span}]"
        )));
    }
    let n = traj.modal.first().map_or(0, Vec::len);
    let mut sup = vec![0.0f64; n];
    for (&t, y) in traj.times.iter().zip(&traj.modal) {
        if t >= ta - slack && t <= tb + slack {
            sup.iter_mut().zip(y).for_each(|(s, v)| *s = s.max(v.abs()));
        }
    }
    Ok(sup)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::rotation_basis;

    #[test]
    fn linear_decay_matches_exponential() {
        let sys =
            OdecoSystem::new(3, rotation_basis(0.4), vec![0.0, 0.0], vec![-1.0, -1.0]).unwrap();
        let x0 = [0.3, -1.2];
        let traj = integrate(
            &sys,
            &x0,
            &IntegrationOptions::new(1e-3, 5.0),
            &DisturbanceSignal::None,
        )
        .unwrap();
        let n0 = (x0[0] * x0[0] + x0[1] * x0[1]).sqrt();
        for (t, x) in traj.times.iter().zip(&traj.states).step_by(250) {
            let n = (x[0] * x[0] + x[1] * x[1]).sqrt();
            assert!((n - (-t).exp() * n0).abs() < 1e-9);
        }
        assert_eq!(traj.termination, Termination::Completed);
        assert_eq!(traj.len(), 5001);
    }

    #[test]
    fn grid_is_uniform() {
        let sys =
            OdecoSystem::new(4, rotation_basis(0.1), vec![1.0, -0.5], vec![-1.0, -1.0]).unwrap();
        let traj = integrate(
            &sys,
            &[0.1, 0.1],
            &IntegrationOptions::new(0.01, 1.0),
            &DisturbanceSignal::None,
        )
        .unwrap();
        for (i, &t) in traj.times.iter().enumerate() {
            assert_eq!(t, i as f64 * 0.01);
        }
        for (x, y) in traj.states.iter().zip(&traj.modal) {
            for r in 0..2 {
                assert!((y[r] - dot(sys.basis_vector(r), x)).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn blow_up_detected_near_escape_time() {
        let sys = OdecoSystem::new(4, vec![vec![1.0]], vec![1.0], vec![-1.0]).unwrap();
        let traj = integrate(
            &sys,
            &[2.0],
            &IntegrationOptions::new(1e-3, 1.0),
            &DisturbanceSignal::None,
        )
        .unwrap();
        let t = traj.blowup_time().expect("should blow up");
        assert!((t - 0.5 * (4.0f64 / 3.0).ln()).abs() < 1e-3, "{t}");
        assert!(matches!(
            traj.termination,
            Termination::BlewUp { mode: 0, .. }
        ));
    }

    #[test]
    fn invalid_options_rejected() {
        let sys = OdecoSystem::new(4, vec![vec![1.0]], vec![1.0], vec![-1.0]).unwrap();
        let none = DisturbanceSignal::None;
        assert!(integrate(&sys, &[0.1], &IntegrationOptions::new(0.0, 1.0), &none).is_err());
        assert!(integrate(&sys, &[0.1], &IntegrationOptions::new(1e-3, -1.0), &none).is_err());
        assert!(integrate(
            &sys,
            &[0.1, 0.2],
            &IntegrationOptions::new(1e-3, 1.0),
            &none
        )
        .is_err());
    }

    #[test]
    fn hitting_time_interpolates() {
        let traj = Trajectory {
            dt: 1.0,
            times: vec![0.0, 1.0, 2.0],
            states: vec![vec![1.0], vec![0.5], vec![0.1]],
            modal: vec![vec![1.0], vec![0.5], vec![0.1]],
            termination: Termination::Completed,
        };
        let hit = measure_hitting_time(&traj, 0.3).unwrap();
        assert!((hit[0].unwrap() - 1.5).abs() < 1e-15);
        assert_eq!(measure_hitting_time(&traj, 2.0).unwrap(), vec![Some(0.0)]);
        assert_eq!(measure_hitting_time(&traj, 0.01).unwrap(), vec![None]);
        assert_eq!(
            measure_ultimate_magnitude(&traj, (1.0, 2.0)).unwrap(),
            vec![0.5]
        );
        assert!(measure_ultimate_magnitude(&traj, (1.0, 3.0)).is_err());
    }

    #[test]
    fn zero_state_stays_zero() {
        let sys =
            OdecoSystem::new(4, rotation_basis(0.5), vec![1.0, -0.5], vec![-1.0, -1.0]).unwrap();
        let traj = integrate(
            &sys,
            &[0.0, 0.0],
            &IntegrationOptions::new(1e-2, 10.0),
            &DisturbanceSignal::None,
        )
        .unwrap();
        let sup = measure_ultimate_magnitude(&traj, (5.0, 10.0)).unwrap();
        assert_eq!(sup, vec![0.0, 0.0]);
    }
}
