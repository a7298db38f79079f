use thiserror::Error;

/// Errors raised by the analysis routines.
///
/// Mode indices are stored zero-based and displayed one-based.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid system: {0}")]
    InvalidSystem(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dense tensor with {entries} entries exceeds the allocation guard of {limit}")]
    SizeGuard { entries: u128, limit: usize },

    #[error("vector is not unit norm (norm = {norm})")]
    NonUnitVector { norm: f64 },

    /// Requested time lies at or beyond the end of the closed-form validity interval.
    #[error("t = {t} is beyond the closed-form horizon {horizon} of mode {}", .mode + 1)]
    BeyondHorizon { mode: usize, t: f64, horizon: f64 },

    #[error("unsupported regime{}: {reason}", fmt_mode(.mode))]
    UnsupportedRegime { mode: Option<usize>, reason: String },

    #[error("precondition violated{}: {reason}", fmt_mode(.mode))]
    Precondition { mode: Option<usize>, reason: String },

    #[error("initial state is outside the region of attraction (violated modes: {})", fmt_modes(.modes))]
    OutsideRoa { modes: Vec<usize> },

    #[error("disturbance bound infeasible for modes {} (must stay below d̄_max)", fmt_modes(.modes))]
    InfeasibleDisturbance { modes: Vec<usize> },
}

pub type Result<T> = std::result::Result<T, Error>;

fn fmt_mode(mode: &Option<usize>) -> String {
    match mode {
        Some(r) => format!(" (mode {})", r + 1),
        None => String::new(),
    }
}

fn fmt_modes(modes: &[usize]) -> String {
    modes
        .iter()
        .map(|r| (r + 1).to_string())
        .collect::<Vec<_>>()
        .join(", ")
}

impl Error {
    pub(crate) fn regime(mode: Option<usize>, reason: impl Into<String>) -> Self {
        Error::UnsupportedRegime {
            mode,
            reason: reason.into(),
        }
    }

    pub(crate) fn precondition(mode: Option<usize>, reason: impl Into<String>) -> Self {
        Error::Precondition {
            mode,
            reason: reason.into(),
        }
    }

    /// Attach a mode index to a per-mode error raised without one.
    pub(crate) fn at_mode(self, r: usize) -> Self {
        match self {
            Error::UnsupportedRegime { mode: None, reason } => Error::UnsupportedRegime {
                mode: Some(r),
                reason,
            },
            Error::Precondition { mode: None, reason } => Error::Precondition {
                mode: Some(r),
                reason,
            },
            Error::BeyondHorizon { t, horizon, .. } => Error::BeyondHorizon {
                mode: r,
                t,
                horizon,
            },
            Error::InfeasibleDisturbance { .. } => Error::InfeasibleDisturbance { modes: vec![r] },
            other => other,
        }
    }
}

pub(crate) fn check_dim(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, got })
    }
}
