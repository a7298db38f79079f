use std::io::{self, Write};
use std::path::{Path, PathBuf};

use odeco::certify::{escape_times, roa_membership, settling_times};
use odeco::io::{trajectory_header, write_basin_csv, write_trajectory_csv};
use odeco::robust::{dbar_max, robust_certificate, DisturbanceEnvelope, RobustCertificate};
use odeco::sim::{
    basin_grid, integrate, measure_hitting_time, measure_ultimate_magnitude, BasinSettings,
    DisturbanceSignal, GridSpec, Termination, Trajectory,
};
use odeco::tensor::validate_system;
use odeco::OdecoSystem;
use serde_json::{json, Value};

use crate::common::{
    create, emit, load_system, load_unchecked, quiet_pipe, DisturbanceArgs, DisturbanceKind, List,
    Settings, StateArg,
};
use crate::error::{CliError, CliResult};

fn termination_json(t: &Termination) -> Value {
    match *t {
        Termination::Completed => json!({ "status": "completed" }),
        Termination::Stopped { time } => json!({ "status": "stopped", "time": time }),
        Termination::BlewUp { time, mode } => {
            json!({ "status": "blew_up", "time": time, "mode": mode + 1 })
        }
    }
}

fn one_based(modes: &[usize]) -> Vec<usize> {
    modes.iter().map(|r| r + 1).collect()
}

/// Window over which ultimate magnitudes are measured: the second half of the run.
fn ultimate_window(settings: &Settings) -> (f64, f64) {
    (0.5 * settings.t_end, settings.t_end)
}

pub fn validate(path: &Path, tol: f64, settings: &Settings) -> CliResult<()> {
    if !(tol > 0.0 && tol.is_finite()) {
        return Err(CliError::input(format!(
            "--tol must be positive and finite (got {tol})"
        )));
    }
    let sys = load_unchecked(path)?;
    let report = validate_system(&sys, tol);
    emit(settings, json!({ "report": report }))?;
    if report.valid {
        Ok(())
    } else {
        Err(CliError::Rejected(format!(
            "invalid system: orthonormality defect {:e} exceeds {tol:e}",
            report.orthonormality_defect
        )))
    }
}

fn write_csv_or_stdout(
    out: Option<&Path>,
    write: impl FnOnce(&mut dyn Write) -> io::Result<()>,
) -> CliResult<()> {
    match out {
        Some(path) => {
            let mut w = create(path)?;
            write(&mut w)?;
            w.flush()?;
        }
        None => {
            let stdout = io::stdout();
            let mut lock = stdout.lock();
            quiet_pipe(write(&mut lock))?;
        }
    }
    Ok(())
}

pub fn simulate(
    path: &Path,
    state: &StateArg,
    disturbance: &DisturbanceArgs,
    out: Option<&Path>,
    settings: &Settings,
) -> CliResult<()> {
    settings.check()?;
    let sys = load_system(path)?;
    let x0 = state.resolve(&sys, None)?;
    let bounds = disturbance.bounds(sys.dim())?;
    let signal = disturbance.signal(bounds.as_deref(), settings, DisturbanceKind::Sinusoid)?;
    let traj = integrate(&sys, &x0, &settings.options(), &signal)?;
    write_csv_or_stdout(out, |w| write_trajectory_csv(w, &traj))?;
    if let Some(path) = out {
        emit(
            settings,
            json!({
                "termination": termination_json(&traj.termination),
                "samples": traj.len(),
                "final_state": traj.states.last(),
                "final_modal": traj.modal.last(),
                "disturbance": signal,
                "out": path,
            }),
        )?;
    }
    Ok(())
}

pub fn roa_check(path: &Path, state: &StateArg, settings: &Settings) -> CliResult<()> {
    let sys = load_system(path)?;
    let x0 = state.resolve(&sys, None)?;
    let cert = roa_membership(&sys, &x0)?;
    emit(
        settings,
        json!({
            "x0": x0,
            "inside": cert.inside,
            "violated_modes": one_based(&cert.violated_modes()),
            "certificate": cert,
        }),
    )
}

pub struct GridArgs {
    pub x_range: Vec<f64>,
    pub y_range: Vec<f64>,
    pub counts: String,
    pub band: Option<f64>,
}

fn range_pair(name: &str, v: &[f64]) -> CliResult<(f64, f64)> {
    match v {
        [a, b] if a.is_finite() && b.is_finite() && a < b => Ok((*a, *b)),
        _ => Err(CliError::input(format!(
            "{name} must be `min,max` with min < max"
        ))),
    }
}

fn parse_counts(text: &str) -> CliResult<(usize, usize)> {
    let parsed: Result<Vec<usize>, _> =
        text.split(',').map(|s| s.trim().parse::<usize>()).collect();
    match parsed.as_deref() {
        Ok([n]) if *n >= 2 => Ok((*n, *n)),
        Ok([nx, ny]) if *nx >= 2 && *ny >= 2 => Ok((*nx, *ny)),
        _ => Err(CliError::input(format!(
            "--counts must be `n` or `nx,ny` with values >= 2 (got `{text}`)"
        ))),
    }
}

fn sidecar_path(out: &Path) -> PathBuf {
    let stem = out
        .file_stem()
        .map_or_else(|| "basin".into(), |s| s.to_string_lossy().into_owned());
    out.with_file_name(format!("{stem}.boundary.json"))
}

pub fn roa_grid(path: &Path, args: &GridArgs, out: &Path, settings: &Settings) -> CliResult<()> {
    settings.check()?;
    let grid = GridSpec {
        x_range: range_pair("--x-range", &args.x_range)?,
        y_range: range_pair("--y-range", &args.y_range)?,
        counts: parse_counts(&args.counts)?,
    };
    let (sx, sy) = grid.spacing();
    let band = args.band.unwrap_or(sx.max(sy));
    if !(band >= 0.0 && band.is_finite()) {
        return Err(CliError::input(format!(
            "--band must be finite and nonnegative (got {band})"
        )));
    }
    let sys = load_system(path)?;
    let basin_settings = BasinSettings {
        t_end: settings.t_end,
        dt: settings.dt,
        eps: settings.eps,
        blowup_threshold: settings.threshold,
    };
    let basin = basin_grid(&sys, &grid, &basin_settings)?;
    let stats = basin.compare_with_analytic(&sys, band)?;

    let mut w = create(out)?;
    write_basin_csv(&mut w, &basin)?;
    w.flush()?;
    let sidecar = sidecar_path(out);
    let mut s = create(&sidecar)?;
    serde_json::to_writer_pretty(
        &mut s,
        &json!({ "grid": grid, "boundaries": basin.boundaries }),
    )
    .map_err(|e| CliError::input(format!("cannot write {}: {e}", sidecar.display())))?;
    writeln!(s)?;
    s.flush()?;

    emit(
        settings,
        json!({
            "grid": grid,
            "agreement_percent": 100.0 * stats.agreement,
            "stats": stats,
            "out": out,
            "boundary_file": sidecar,
        }),
    )
}

fn vector_or_null(values: &[Option<f64>]) -> Value {
    Value::Array(
        values
            .iter()
            .map(|v| v.map_or(Value::Null, Value::from))
            .collect(),
    )
}

pub fn settle(path: &Path, state: &StateArg, verify: bool, settings: &Settings) -> CliResult<()> {
    settings.check()?;
    let sys = load_system(path)?;
    let x0 = state.resolve(&sys, None)?;
    let times = settling_times(&sys, &x0, settings.eps)?;
    let total = times.iter().copied().fold(0.0, f64::max);
    let mut body = json!({ "x0": x0, "per_mode": times, "settling_time": total });
    if verify {
        let opts = odeco::sim::IntegrationOptions::new(settings.dt, total + 1.0)
            .with_threshold(settings.threshold);
        let traj = integrate(&sys, &x0, &opts, &DisturbanceSignal::None)?;
        let measured = measure_hitting_time(&traj, settings.eps)?;
        let tol = 2.0 * settings.dt;
        let agree = times
            .iter()
            .zip(&measured)
            .all(|(t, m)| m.is_some_and(|m| (t - m).abs() <= tol));
        body["verify"] = json!({
            "measured": vector_or_null(&measured),
            "tolerance": tol,
            "agree": agree,
            "termination": termination_json(&traj.termination),
        });
    }
    emit(settings, body)
}

pub fn escape(path: &Path, state: &StateArg, verify: bool, settings: &Settings) -> CliResult<()> {
    settings.check()?;
    let sys = load_system(path)?;
    let x0 = state.resolve(&sys, None)?;
    let times = escape_times(&sys, &x0)?;
    let first = times
        .iter()
        .enumerate()
        .filter_map(|(r, t)| t.map(|t| (r, t)))
        .min_by(|a, b| a.1.total_cmp(&b.1));
    let Some((mode, time)) = first else {
        emit(
            settings,
            json!({
                "x0": x0,
                "per_mode": vector_or_null(&times),
                "escape": Value::Null,
                "error": { "kind": "no_escaping_mode", "modes": [], "message": "no mode escapes from this initial state" },
            }),
        )?;
        return Err(CliError::Rejected(
            "no mode escapes from this initial state".into(),
        ));
    };
    let mut body = json!({
        "x0": x0,
        "per_mode": vector_or_null(&times),
        "escape": { "mode": mode + 1, "time": time },
    });
    if verify {
        let opts = odeco::sim::IntegrationOptions::new(settings.dt, time + 1.0)
            .with_threshold(settings.threshold);
        let traj = integrate(&sys, &x0, &opts, &DisturbanceSignal::None)?;
        let measured = traj.blowup_time();
        body["verify"] = json!({
            "measured": measured,
            "difference": measured.map(|m| m - time),
            "termination": termination_json(&traj.termination),
        });
    }
    emit(settings, body)
}

fn certificate(sys: &OdecoSystem, bounds: Vec<f64>) -> CliResult<RobustCertificate> {
    Ok(robust_certificate(sys, &DisturbanceEnvelope::new(bounds)?)?)
}

fn dbar_limits(sys: &OdecoSystem) -> Value {
    Value::Array(
        sys.modes()
            .map(|m| dbar_max(&m).map_or(Value::Null, Value::from))
            .collect(),
    )
}

pub fn robust_bounds(path: &Path, dbar: &[f64], settings: &Settings) -> CliResult<()> {
    let sys = load_system(path)?;
    let args = DisturbanceArgs {
        dbar: Some(List(dbar.to_vec())),
        disturbance: None,
        seed: None,
    };
    let bounds = args.bounds(sys.dim())?.unwrap_or_default();
    let cert = certificate(&sys, bounds)?;
    emit(
        settings,
        json!({ "dbar_max": dbar_limits(&sys), "certificate": cert }),
    )
}

fn write_robust_csv(
    w: &mut dyn Write,
    traj: &Trajectory,
    signal: &DisturbanceSignal,
    cbar: &[f64],
) -> io::Result<()> {
    let n = cbar.len();
    let extra: Vec<String> = (1..=n)
        .map(|r| format!("d{r}"))
        .chain((1..=n).map(|r| format!("cbar{r}")))
        .collect();
    writeln!(w, "{},{}", trajectory_header(n), extra.join(","))?;
    let cbar_cols = cbar
        .iter()
        .map(|c| c.to_string())
        .collect::<Vec<_>>()
        .join(",");
    for ((t, x), y) in traj.times.iter().zip(&traj.states).zip(&traj.modal) {
        let d = signal.eval(*t, y);
        let cols: Vec<String> = x.iter().chain(y).chain(&d).map(|v| v.to_string()).collect();
        writeln!(w, "{t},{},{cbar_cols}", cols.join(","))?;
    }
    Ok(())
}

pub fn robust_run(
    path: &Path,
    state: &StateArg,
    disturbance: &DisturbanceArgs,
    out: Option<&Path>,
    settings: &Settings,
) -> CliResult<()> {
    settings.check()?;
    let sys = load_system(path)?;
    let x0 = state.resolve(&sys, Some(&vec![0.5; sys.dim()]))?;
    let bounds = disturbance
        .bounds(sys.dim())?
        .ok_or_else(|| CliError::input("--dbar is required"))?;
    let cert = certificate(&sys, bounds.clone())?;
    let signal = disturbance.signal(Some(&bounds), settings, DisturbanceKind::Sinusoid)?;
    let traj = integrate(&sys, &x0, &settings.options(), &signal)?;
    let cbar = cert.bounds();
    write_csv_or_stdout(out, |w| write_robust_csv(w, &traj, &signal, &cbar))?;
    if let Some(path) = out {
        let window = ultimate_window(settings);
        let ultimate = measure_ultimate_magnitude(&traj, window).ok();
        let within = ultimate
            .as_ref()
            .map(|u| u.iter().zip(&cbar).map(|(m, c)| m <= c).collect::<Vec<_>>());
        emit(
            settings,
            json!({
                "x0": x0,
                "certificate": cert,
                "termination": termination_json(&traj.termination),
                "window": [window.0, window.1],
                "ultimate_magnitude": ultimate,
                "within_bounds": within,
                "out": path,
            }),
        )?;
    }
    Ok(())
}

fn sweep_values(range: &[f64]) -> CliResult<Vec<f64>> {
    let [start, stop, step] = range else {
        return Err(CliError::input("--dbar-range must be `start,stop,step`"));
    };
    let ok = start.is_finite()
        && stop.is_finite()
        && *start >= 0.0
        && *stop >= *start
        && *step > 0.0
        && step.is_finite();
    if !ok {
        return Err(CliError::input(
            "--dbar-range needs 0 <= start <= stop and step > 0",
        ));
    }
    let count = ((stop - start) / step + 1e-9).floor() as usize + 1;
    Ok((0..count)
        .map(|i| ((start + i as f64 * step) * 1e12).round() / 1e12)
        .collect())
}

pub fn robust_sweep(
    path: &Path,
    range: &[f64],
    state: &StateArg,
    kind: DisturbanceKind,
    out: Option<&Path>,
    settings: &Settings,
) -> CliResult<()> {
    settings.check()?;
    if !matches!(kind, DisturbanceKind::Sinusoid | DisturbanceKind::BangBang) {
        return Err(CliError::input(
            "sweeps support --disturbance sinusoid or bang-bang",
        ));
    }
    let sys = load_system(path)?;
    let n = sys.dim();
    let x0 = match &state.x0 {
        Some(_) => state.resolve(&sys, None)?,
        None => vec![0.0; n],
    };
    let values = sweep_values(range)?;
    let window = ultimate_window(settings);
    let mut rows = Vec::new();
    for &dbar in &values {
        let cert = certificate(&sys, vec![dbar; n])?;
        let args = DisturbanceArgs {
            dbar: Some(List(vec![dbar])),
            disturbance: Some(kind),
            seed: None,
        };
        let signal = args.signal(Some(&vec![dbar; n]), settings, kind)?;
        let traj = integrate(&sys, &x0, &settings.options(), &signal)?;
        let measured = measure_ultimate_magnitude(&traj, window)?;
        for (r, (p, m)) in cert.bounds().iter().zip(&measured).enumerate() {
            rows.push((dbar, r + 1, *p, *m));
        }
    }
    write_csv_or_stdout(out, |w| {
        writeln!(w, "dbar,mode,predicted,measured")?;
        for (d, r, p, m) in &rows {
            writeln!(w, "{d},{r},{p},{m}")?;
        }
        Ok(())
    })?;
    if let Some(path) = out {
        let per_mode = |r: usize, pick: fn(&(f64, usize, f64, f64)) -> f64| -> Vec<f64> {
            rows.iter().filter(|row| row.1 == r).map(pick).collect()
        };
        let nondecreasing = |v: &[f64]| v.windows(2).all(|w| w[0] <= w[1]);
        let monotone = (1..=n).all(|r| {
            nondecreasing(&per_mode(r, |row| row.2)) && nondecreasing(&per_mode(r, |row| row.3))
        });
        emit(
            settings,
            json!({
                "x0": x0,
                "dbar": values,
                "window": [window.0, window.1],
                "all_below_prediction": rows.iter().all(|row| row.3 <= row.2),
                "monotone": monotone,
                "rows": rows.len(),
                "out": path,
            }),
        )?;
    }
    Ok(())
}
