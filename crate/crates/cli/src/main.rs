mod commands;
mod common;
mod error;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use common::{parse_list, DisturbanceArgs, List, Settings, StateArg, SystemArg};
use error::CliError;

/// Certificates and simulations for ODECO polynomial feedback systems.
#[derive(Debug, Parser)]
#[command(name = "odeco", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Check a system spec and list parity, sign sets and thresholds.
    Validate(ValidateArgs),
    /// Integrate the closed loop and write the trajectory as CSV.
    Simulate(SimulateArgs),
    /// Region-of-attraction certificate or basin grid.
    #[command(subcommand)]
    Roa(RoaCommand),
    /// Analytic settling times, optionally checked against simulation.
    Settle(TimingArgs),
    /// Analytic escape times, optionally checked against simulation.
    Escape(TimingArgs),
    /// Robust bounds under bounded matched disturbances.
    #[command(subcommand)]
    Robust(RobustCommand),
}

#[derive(Debug, Args)]
struct ValidateArgs {
    #[command(flatten)]
    system: SystemArg,
    /// Orthonormality tolerance on max |VᵀV − I|.
    #[arg(long, default_value_t = odeco::tensor::DEFAULT_ORTHO_TOL)]
    tol: f64,
    #[command(flatten)]
    settings: Settings,
}

#[derive(Debug, Args)]
struct SimulateArgs {
    #[command(flatten)]
    system: SystemArg,
    #[command(flatten)]
    state: StateArg,
    #[command(flatten)]
    disturbance: DisturbanceArgs,
    /// Trajectory CSV path; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    settings: Settings,
}

#[derive(Debug, Subcommand)]
enum RoaCommand {
    /// Certify one initial state.
    Check(RoaCheckArgs),
    /// Classify a planar grid by simulation and compare with the analytic region.
    Grid(RoaGridArgs),
}

#[derive(Debug, Args)]
struct RoaCheckArgs {
    #[command(flatten)]
    system: SystemArg,
    #[command(flatten)]
    state: StateArg,
    #[command(flatten)]
    settings: Settings,
}

#[derive(Debug, Args)]
struct RoaGridArgs {
    #[command(flatten)]
    system: SystemArg,
    /// Range of x1 as `min,max`.
    #[arg(long = "x-range", value_parser = parse_list, allow_hyphen_values = true, default_value = "-3,3")]
    x_range: List,
    /// Range of x2 as `min,max`.
    #[arg(long = "y-range", value_parser = parse_list, allow_hyphen_values = true, default_value = "-3,3")]
    y_range: List,
    /// Points per axis, one value or `nx,ny`.
    #[arg(long, default_value = "121")]
    counts: String,
    /// Exclusion band around the analytic boundary; one cell width when omitted.
    #[arg(long)]
    band: Option<f64>,
    /// Basin CSV path; the boundary sidecar is written next to it.
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    settings: Settings,
}

#[derive(Debug, Args)]
struct TimingArgs {
    #[command(flatten)]
    system: SystemArg,
    #[command(flatten)]
    state: StateArg,
    /// Also integrate and report measured times.
    #[arg(long)]
    verify: bool,
    #[command(flatten)]
    settings: Settings,
}

#[derive(Debug, Subcommand)]
enum RobustCommand {
    /// Robust thresholds, ultimate bounds, rates and gains.
    Bounds(RobustBoundsArgs),
    /// Disturbed trajectory with the predicted bounds as extra columns.
    Run(RobustRunArgs),
    /// Predicted and measured ultimate bounds over a range of d̄.
    Sweep(RobustSweepArgs),
}

#[derive(Debug, Args)]
struct RobustBoundsArgs {
    #[command(flatten)]
    system: SystemArg,
    /// Disturbance bound d̄: one value for every mode or one per mode.
    #[arg(long, value_parser = parse_list)]
    dbar: List,
    #[command(flatten)]
    settings: Settings,
}

#[derive(Debug, Args)]
struct RobustRunArgs {
    #[command(flatten)]
    system: SystemArg,
    /// Initial state; defaults to modal coordinates 0.5 in every mode.
    #[command(flatten)]
    state: StateArg,
    #[command(flatten)]
    disturbance: DisturbanceArgs,
    /// Trajectory CSV path; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    settings: Settings,
}

#[derive(Debug, Args)]
struct RobustSweepArgs {
    #[command(flatten)]
    system: SystemArg,
    /// Sweep as `start,stop,step`.
    #[arg(long = "dbar-range", value_parser = parse_list, default_value = "0.05,0.35,0.05")]
    dbar_range: List,
    /// Initial state; the origin when omitted.
    #[command(flatten)]
    state: StateArg,
    /// Disturbance shape (sinusoid or bang-bang).
    #[arg(long, value_enum, default_value = "sinusoid")]
    disturbance: common::DisturbanceKind,
    /// Sweep CSV path; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    settings: Settings,
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Validate(a) => commands::validate(&a.system.system, a.tol, &a.settings),
        Command::Simulate(a) => commands::simulate(
            &a.system.system,
            &a.state,
            &a.disturbance,
            a.out.as_deref(),
            &a.settings,
        ),
        Command::Roa(RoaCommand::Check(a)) => {
            commands::roa_check(&a.system.system, &a.state, &a.settings)
        }
        Command::Roa(RoaCommand::Grid(a)) => commands::roa_grid(
            &a.system.system,
            &commands::GridArgs {
                x_range: a.x_range.0,
                y_range: a.y_range.0,
                counts: a.counts,
                band: a.band,
            },
            &a.out,
            &a.settings,
        ),
        Command::Settle(a) => commands::settle(&a.system.system, &a.state, a.verify, &a.settings),
        Command::Escape(a) => commands::escape(&a.system.system, &a.state, a.verify, &a.settings),
        Command::Robust(RobustCommand::Bounds(a)) => {
            commands::robust_bounds(&a.system.system, &a.dbar.0, &a.settings)
        }
        Command::Robust(RobustCommand::Run(a)) => commands::robust_run(
            &a.system.system,
            &a.state,
            &a.disturbance,
            a.out.as_deref(),
            &a.settings,
        ),
        Command::Robust(RobustCommand::Sweep(a)) => commands::robust_sweep(
            &a.system.system,
            &a.dbar_range.0,
            &a.state,
            a.disturbance,
            a.out.as_deref(),
            &a.settings,
        ),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            let _ = err.print();
            return if err.use_stderr() {
                ExitCode::from(2)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            if let Some(report) = err.to_json() {
                let _ = common::print_json(&report);
            }
            eprintln!("error: {err}");
            err.exit_code()
        }
    }
}
