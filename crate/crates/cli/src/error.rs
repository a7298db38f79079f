use std::fmt;
use std::process::ExitCode;

use serde_json::{json, Value};

/// CLI failure, split by exit status.
#[derive(Debug)]
pub enum CliError {
    /// Unreadable or malformed input; exit status 2.
    Input(String),
    /// The analysis refused the system or state; exit status 1.
    Domain(odeco::Error),
    /// A check failed with a report already printed; exit status 1.
    Rejected(String),
}

pub type CliResult<T> = Result<T, CliError>;

impl CliError {
    pub fn input(msg: impl Into<String>) -> Self {
        CliError::Input(msg.into())
    }

    pub fn exit_code(&self) -> ExitCode {
        match self {
            CliError::Input(_) => ExitCode::from(2),
            CliError::Domain(_) | CliError::Rejected(_) => ExitCode::from(1),
        }
    }

    /// Machine-readable description for domain failures.
    pub fn to_json(&self) -> Option<Value> {
        let CliError::Domain(err) = self else {
            return None;
        };
        let one_based = |modes: &[usize]| modes.iter().map(|r| r + 1).collect::<Vec<_>>();
        let (kind, modes) = match err {
            odeco::Error::OutsideRoa { modes } => ("outside_roa", one_based(modes)),
            odeco::Error::InfeasibleDisturbance { modes } => {
                ("infeasible_disturbance", one_based(modes))
            }
            odeco::Error::UnsupportedRegime { mode, .. } => (
                "unsupported_regime",
                mode.map(|r| vec![r + 1]).unwrap_or_default(),
            ),
            odeco::Error::Precondition { mode, .. } => (
                "precondition",
                mode.map(|r| vec![r + 1]).unwrap_or_default(),
            ),
            odeco::Error::BeyondHorizon { mode, .. } => ("beyond_horizon", vec![mode + 1]),
            odeco::Error::NonUnitVector { .. } | odeco::Error::InvalidSystem(_) => {
                ("invalid_system", Vec::new())
            }
            _ => ("error", Vec::new()),
        };
        Some(json!({ "error": { "kind": kind, "modes": modes, "message": err.to_string() } }))
    }
}

impl From<odeco::Error> for CliError {
    fn from(err: odeco::Error) -> Self {
        match err {
            odeco::Error::DimensionMismatch { .. } | odeco::Error::InvalidArgument(_) => {
                CliError::Input(err.to_string())
            }
            other => CliError::Domain(other),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(err: std::io::Error) -> Self {
        CliError::Input(err.to_string())
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Input(msg) | CliError::Rejected(msg) => f.write_str(msg),
            CliError::Domain(err) => write!(f, "{err}"),
        }
    }
}
