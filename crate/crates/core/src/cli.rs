//! Command-line front end for the `harvest` binary.

use crate::config::{ConfigError, RunConfig};
use crate::kinematics::{
    check_limits, forward_kinematics, inverse_kinematics, CartesianPoint, JointState,
    KinematicsError,
};
use crate::report::{self, ReportError};
use crate::simulation::{
    compare_controllers, reference_cases, run_batch, run_harvest_cycle, ControllerKind, FailureKind,
    PlantPreset, SimError,
};
use clap::{Parser, Subcommand, ValueEnum};
use std::io::Write;
use std::path::{Path, PathBuf};
use thiserror::Error;

/// Process exit codes.
pub mod exit {
    pub const OK: i32 = 0;
    pub const USAGE: i32 = 2;
    pub const CONFIG: i32 = 2;
    pub const UNREACHABLE: i32 = 3;
    pub const SIMULATION: i32 = 4;
    pub const IO: i32 = 5;
}

#[derive(Debug, Parser)]
#[command(name = "harvest", version, about = "Pan/tilt/prismatic picking-arm kinematics and simulation")]
pub struct Cli {
    /// TOML configuration file.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Base seed; overrides the config.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory; overrides the config.
    #[arg(long, global = true)]
    pub out_dir: Option<PathBuf>,
    /// Write SVG plots next to the CSV/JSON outputs.
    #[arg(long, global = true)]
    pub plots: bool,
    /// Plant preset; replaces the config's [plant] section.
    #[arg(long, global = true, value_enum)]
    pub plant: Option<PlantArg>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum PlantArg {
    Ideal,
    Nominal,
    Perturbed,
}

impl From<PlantArg> for PlantPreset {
    fn from(p: PlantArg) -> Self {
        match p {
            PlantArg::Ideal => PlantPreset::Ideal,
            PlantArg::Nominal => PlantPreset::Nominal,
            PlantArg::Perturbed => PlantPreset::Perturbed,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ControllerArg {
    Proposed,
    OpenLoop,
    PositionMode,
}

impl From<ControllerArg> for ControllerKind {
    fn from(c: ControllerArg) -> Self {
        match c {
            ControllerArg::Proposed => ControllerKind::Proposed,
            ControllerArg::OpenLoop => ControllerKind::OpenLoop,
            ControllerArg::PositionMode => ControllerKind::PositionMode,
        }
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Joint values (degrees, degrees, meters) to base-frame position (m).
    Fk {
        #[arg(allow_negative_numbers = true)]
        phi_deg: f64,
        #[arg(allow_negative_numbers = true)]
        theta_deg: f64,
        #[arg(allow_negative_numbers = true)]
        d_m: f64,
    },
    /// Base-frame position (m) to joint values (degrees, degrees, meters).
    Ik {
        #[arg(allow_negative_numbers = true)]
        x: f64,
        #[arg(allow_negative_numbers = true)]
        y: f64,
        #[arg(allow_negative_numbers = true)]
        z: f64,
    },
    /// Run one picking cycle against a target (m).
    Simulate {
        #[arg(allow_negative_numbers = true)]
        x: f64,
        #[arg(allow_negative_numbers = true)]
        y: f64,
        #[arg(allow_negative_numbers = true)]
        z: f64,
        #[arg(long, value_enum, default_value = "proposed")]
        controller: ControllerArg,
    },
    /// Run picking cycles on randomly sampled targets.
    Batch {
        /// Number of trials; overrides the config.
        #[arg(long)]
        n: Option<usize>,
        #[arg(long, value_enum, default_value = "proposed")]
        controller: ControllerArg,
    },
    /// Compare the three controllers on the three reference cases.
    Compare {
        /// Repetitions per case; overrides the config.
        #[arg(long)]
        repetitions: Option<usize>,
    },
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{0}")]
    Kinematics(#[from] KinematicsError),
    #[error("simulation failed: {0}")]
    Simulation(String),
    #[error("unreachable target: {0}")]
    Unreachable(String),
    #[error(transparent)]
    Report(#[from] ReportError),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(ConfigError::Io { .. }) => exit::IO,
            CliError::Config(_) => exit::CONFIG,
            CliError::Kinematics(KinematicsError::InvalidLinks(_))
            | CliError::Kinematics(KinematicsError::InvalidLimits(_)) => exit::CONFIG,
            CliError::Kinematics(_) | CliError::Unreachable(_) => exit::UNREACHABLE,
            CliError::Simulation(_) => exit::SIMULATION,
            CliError::Report(ReportError::Plot(_)) => exit::SIMULATION,
            CliError::Report(_) | CliError::Io(_) => exit::IO,
        }
    }
}

impl From<SimError> for CliError {
    fn from(e: SimError) -> Self {
        match e {
            SimError::InvalidConfig(m) => CliError::Config(ConfigError::Invalid(m)),
            other => CliError::Simulation(other.to_string()),
        }
    }
}

fn load_config(cli: &Cli) -> Result<RunConfig, CliError> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(d) = &cli.out_dir {
        cfg.out_dir = d.clone();
    }
    if cli.plots {
        cfg.plots = true;
    }
    if let Some(p) = cli.plant {
        cfg.set_plant_preset(p.into());
    }
    cfg.validate()?;
    Ok(cfg)
}

fn ensure_dir(dir: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(dir).map_err(|source| {
        CliError::Report(ReportError::Io {
            path: dir.display().to_string(),
            source,
        })
    })
}

/// Execute a parsed command line, writing human-readable output to `out`.
pub fn run<W: Write>(cli: &Cli, out: &mut W) -> Result<(), CliError> {
    let cfg = load_config(cli)?;
    match &cli.command {
        Command::Fk {
            phi_deg,
            theta_deg,
            d_m,
        } => {
            let q = JointState::from_degrees(*phi_deg, *theta_deg, *d_m);
            let report = check_limits(&q, &cfg.limits);
            if !report.is_valid() {
                return Err(KinematicsError::LimitViolation(report).into());
            }
            let p = forward_kinematics(&q, &cfg.links);
            writeln!(out, "{:.4} {:.4} {:.4}", p.x, p.y, p.z)?;
        }
        Command::Ik { x, y, z } => {
            let q = inverse_kinematics(&CartesianPoint::new(*x, *y, *z), &cfg.links, &cfg.limits)?;
            writeln!(
                out,
                "{:.2} {:.2} {:.4}",
                q.phi.to_degrees(),
                q.theta.to_degrees(),
                q.d_prismatic
            )?;
        }
        Command::Simulate { x, y, z, controller } => {
            let target = CartesianPoint::new(*x, *y, *z);
            let sim = cfg.sim_config();
            let rec = run_harvest_cycle(&target, (*controller).into(), &sim, cfg.seed)?;
            ensure_dir(&cfg.out_dir)?;
            let mut csv = Vec::new();
            report::write_log_csv(&rec.log, &mut csv)?;
            report::write_file(&cfg.out_dir.join("trial.csv"), &csv)?;
            report::write_file(
                &cfg.out_dir.join("trial.json"),
                report::to_json_pretty(&rec)?.as_bytes(),
            )?;
            if cfg.plots {
                report::write_tracking_plots(&rec.log, &cfg.out_dir)?;
            }
            writeln!(
                out,
                "controller={} final_error_m={:.6} success={} phase={:?} cycle_s={:.3}",
                rec.controller,
                rec.final_error,
                rec.success,
                rec.final_phase(),
                rec.phase_durations.total()
            )?;
            if let Some(f) = &rec.failure {
                let msg = format!("{:?} during {:?}: {}", f.kind, f.phase, f.message);
                return Err(match f.kind {
                    FailureKind::Unreachable => CliError::Unreachable(msg),
                    _ => CliError::Simulation(msg),
                });
            }
        }
        Command::Batch { n, controller } => {
            let n = n.unwrap_or(cfg.batch_n);
            let mut sim = cfg.sim_config();
            sim.settings.log_decimation = 0;
            let res = run_batch(n, &cfg.scene, (*controller).into(), &sim, cfg.seed)?;
            ensure_dir(&cfg.out_dir)?;
            let json = report::to_json_pretty(&res.summary)?;
            report::write_file(&cfg.out_dir.join("batch_summary.json"), json.as_bytes())?;
            let mut csv = Vec::new();
            report::write_trials_csv(&res.trials, &mut csv)?;
            report::write_file(&cfg.out_dir.join("batch_trials.csv"), &csv)?;
            out.write_all(json.as_bytes())?;
        }
        Command::Compare { repetitions } => {
            let reps = repetitions.unwrap_or(cfg.repetitions);
            let table = compare_controllers(&reference_cases(), reps, &cfg.sim_config(), cfg.seed)?;
            ensure_dir(&cfg.out_dir)?;
            let mut csv = Vec::new();
            table.write_csv(&mut csv)?;
            report::write_file(&cfg.out_dir.join("compare.csv"), &csv)?;
            out.write_all(table.render_text().as_bytes())?;
        }
    }
    Ok(())
}
