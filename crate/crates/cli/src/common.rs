use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use odeco::io::SystemSpec;
use odeco::modal::from_modal;
use odeco::sim::{
    random_hold_disturbance, sinusoid_disturbance, DisturbanceSignal, IntegrationOptions,
    DEFAULT_BLOWUP_THRESHOLD, DEFAULT_DT, DEFAULT_T_END,
};
use odeco::OdecoSystem;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::Value;

use crate::error::{CliError, CliResult};

/// Hold interval of the random piecewise-constant disturbance.
const RANDOM_HOLD: f64 = 0.5;

/// Comma-separated list of reals as one argument value.
#[derive(Debug, Clone, PartialEq)]
pub struct List(pub Vec<f64>);

/// Parse `0.5,-1e-3` style lists.
pub fn parse_list(text: &str) -> Result<List, String> {
    text.split(',')
        .map(|s| {
            let s = s.trim();
            s.parse::<f64>()
                .map_err(|_| format!("`{s}` is not a number"))
        })
        .collect::<Result<_, _>>()
        .map(List)
}

#[derive(Debug, Clone, Args)]
pub struct SystemArg {
    /// System spec JSON file.
    #[arg(long)]
    pub system: PathBuf,
}

/// Numerical settings shared by every subcommand and echoed in each report.
#[derive(Debug, Clone, Args, Serialize)]
pub struct Settings {
    /// Integrator step.
    #[arg(long, default_value_t = DEFAULT_DT)]
    pub dt: f64,
    /// Settling tolerance ε.
    #[arg(long, default_value_t = 1e-3)]
    pub eps: f64,
    /// Integration horizon.
    #[arg(long = "t-end", default_value_t = DEFAULT_T_END)]
    pub t_end: f64,
    /// Base disturbance frequency ω.
    #[arg(long, default_value_t = 1.0)]
    pub omega: f64,
    /// Blow-up threshold on the modal sup-norm.
    #[arg(long, default_value_t = DEFAULT_BLOWUP_THRESHOLD)]
    pub threshold: f64,
}

impl Settings {
    pub fn check(&self) -> CliResult<()> {
        for (name, v) in [
            ("--dt", self.dt),
            ("--eps", self.eps),
            ("--t-end", self.t_end),
            ("--omega", self.omega),
            ("--threshold", self.threshold),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(CliError::input(format!(
                    "{name} must be positive and finite (got {v})"
                )));
            }
        }
        if self.dt > self.t_end {
            return Err(CliError::input("--dt must not exceed --t-end"));
        }
        Ok(())
    }

    pub fn options(&self) -> IntegrationOptions {
        IntegrationOptions::new(self.dt, self.t_end).with_threshold(self.threshold)
    }
}

/// Initial state given in original or modal coordinates.
#[derive(Debug, Clone, Args)]
pub struct StateArg {
    /// Initial state, comma-separated.
    #[arg(long, value_parser = parse_list, allow_hyphen_values = true)]
    pub x0: Option<List>,
    /// Read `--x0` as modal coordinates y0 = Vᵀx0.
    #[arg(long)]
    pub modal: bool,
}

impl StateArg {
    pub fn resolve(&self, sys: &OdecoSystem, default_modal: Option<&[f64]>) -> CliResult<Vec<f64>> {
        let (values, modal) = match (&self.x0, default_modal) {
            (Some(v), _) => (v.0.clone(), self.modal),
            (None, Some(d)) => (d.to_vec(), true),
            (None, None) => return Err(CliError::input("--x0 is required")),
        };
        if values.len() != sys.dim() {
            return Err(CliError::input(format!(
                "--x0 has {} entries but the system has dimension {}",
                values.len(),
                sys.dim()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(CliError::input("--x0 entries must be finite"));
        }
        if modal {
            Ok(from_modal(sys, &values)?)
        } else {
            Ok(values)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum DisturbanceKind {
    None,
    Sinusoid,
    BangBang,
    Random,
}

/// Disturbance shape and per-mode bounds.
#[derive(Debug, Clone, Args)]
pub struct DisturbanceArgs {
    /// Disturbance bound d̄: one value for every mode or one per mode.
    #[arg(long, value_parser = parse_list)]
    pub dbar: Option<List>,
    /// Disturbance shape.
    #[arg(long, value_enum)]
    pub disturbance: Option<DisturbanceKind>,
    /// Seed for `--disturbance random`.
    #[arg(long)]
    pub seed: Option<u64>,
}

impl DisturbanceArgs {
    pub fn bounds(&self, n: usize) -> CliResult<Option<Vec<f64>>> {
        let Some(List(d)) = &self.dbar else {
            return Ok(None);
        };
        let bounds = match d.len() {
            1 => vec![d[0]; n],
            len if len == n => d.clone(),
            len => {
                return Err(CliError::input(format!(
                    "--dbar has {len} entries; give one value or {n}"
                )))
            }
        };
        if bounds.iter().any(|b| !(*b >= 0.0 && b.is_finite())) {
            return Err(CliError::input(
                "--dbar entries must be finite and nonnegative",
            ));
        }
        Ok(Some(bounds))
    }

    /// Build the signal; `default` applies when `--disturbance` is absent and a bound is given.
    pub fn signal(
        &self,
        bounds: Option<&[f64]>,
        settings: &Settings,
        default: DisturbanceKind,
    ) -> CliResult<DisturbanceSignal> {
        let kind = match (self.disturbance, bounds) {
            (Some(k), _) => k,
            (None, Some(_)) => default,
            (None, None) => DisturbanceKind::None,
        };
        if kind != DisturbanceKind::None && bounds.is_none() {
            return Err(CliError::input("--disturbance needs --dbar"));
        }
        if kind != DisturbanceKind::Random && self.seed.is_some() {
            return Err(CliError::input(
                "--seed only applies to --disturbance random",
            ));
        }
        let bounds = bounds.unwrap_or(&[]);
        Ok(match kind {
            DisturbanceKind::None => DisturbanceSignal::None,
            DisturbanceKind::Sinusoid => sinusoid_disturbance(bounds, settings.omega)?,
            DisturbanceKind::BangBang => DisturbanceSignal::BangBang {
                bounds: bounds.to_vec(),
                modes: (0..bounds.len()).collect(),
            },
            DisturbanceKind::Random => {
                let seed = self
                    .seed
                    .ok_or_else(|| CliError::input("--disturbance random requires --seed"))?;
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                random_hold_disturbance(&mut rng, bounds, RANDOM_HOLD, settings.t_end)?
            }
        })
    }
}

/// Read and parse a spec without checking orthonormality.
pub fn load_unchecked(path: &Path) -> CliResult<OdecoSystem> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::input(format!("cannot read {}: {e}", path.display())))?;
    let spec = SystemSpec::from_json(&text)
        .map_err(|e| CliError::input(format!("cannot parse {}: {e}", path.display())))?;
    spec.to_system_unchecked()
        .map_err(|e| CliError::input(format!("{}: {e}", path.display())))
}

/// Read a spec and require an orthonormal basis.
pub fn load_system(path: &Path) -> CliResult<OdecoSystem> {
    let sys = load_unchecked(path)?;
    Ok(OdecoSystem::new(
        sys.degree(),
        sys.basis().to_vec(),
        sys.lambda().to_vec(),
        sys.kappa().to_vec(),
    )?)
}

/// Print a JSON report with the settings block first.
pub fn emit(settings: &Settings, body: Value) -> CliResult<()> {
    let mut report = serde_json::Map::new();
    report.insert(
        "settings".into(),
        serde_json::to_value(settings).expect("settings serialize"),
    );
    match body {
        Value::Object(map) => report.extend(map),
        other => {
            report.insert("result".into(), other);
        }
    }
    print_json(&Value::Object(report))
}

/// Write pretty JSON to stdout; a closed pipe is not an error.
pub fn print_json(value: &Value) -> CliResult<()> {
    let text = serde_json::to_string_pretty(value).expect("report serializes");
    quiet_pipe(writeln!(std::io::stdout().lock(), "{text}"))
}

pub fn quiet_pipe(res: std::io::Result<()>) -> CliResult<()> {
    match res {
        Err(e) if e.kind() == std::io::ErrorKind::BrokenPipe => Ok(()),
        other => Ok(other?),
    }
}

pub fn create(path: &Path) -> CliResult<std::io::BufWriter<fs::File>> {
    fs::File::create(path)
        .map(std::io::BufWriter::new)
        .map_err(|e| CliError::input(format!("cannot write {}: {e}", path.display())))
}
