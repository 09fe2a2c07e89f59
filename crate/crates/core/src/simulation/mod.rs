//! Plant integration, the harvest-cycle state machine and batch experiments.

mod cycle;
mod experiment;
mod plant;

pub use cycle::{
    run_harvest_cycle, run_motion_test, run_tracking, FailureKind, LogRow, MotionResult,
    PhaseDurations, TrialFailure, TrialRecord,
};
pub use experiment::{
    compare_controllers, derive_seed, reference_cases, run_batch, BatchResult, BatchSummary,
    ComparisonRow, ComparisonTable, SceneConfig,
};
pub use plant::{
    hard_limit_report, step, step_with, Actuators, AppliedRates, Commands, Phase, PlantModel,
    PlantPreset, SimState,
};

use crate::control::{ControlError, ControllerGains};
use crate::kinematics::{JointLimits, JointState, KinematicsError, LimitReport, LinkParams};
use crate::perception::{CameraIntrinsics, PerceptionError, RigidTransform};
use serde::{Deserialize, Serialize};
use std::fmt;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("joint left the hard limits: {0}")]
    LimitBreach(LimitReport),
    #[error(transparent)]
    Control(#[from] ControlError),
    #[error(transparent)]
    Perception(#[from] PerceptionError),
    #[error(transparent)]
    Kinematics(#[from] KinematicsError),
    #[error("invalid simulation config: {0}")]
    InvalidConfig(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ControllerKind {
    /// Closed-loop Cartesian velocity law.
    Proposed,
    /// Feedforward-only velocity law.
    OpenLoop,
    /// Joint-space quintic tracked by the servo's own position loop.
    PositionMode,
}

impl ControllerKind {
    pub const ALL: [ControllerKind; 3] = [
        ControllerKind::OpenLoop,
        ControllerKind::PositionMode,
        ControllerKind::Proposed,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ControllerKind::Proposed => "proposed",
            ControllerKind::OpenLoop => "open_loop",
            ControllerKind::PositionMode => "position_mode",
        }
    }
}

impl fmt::Display for ControllerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for ControllerKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "proposed" => Ok(Self::Proposed),
            "open_loop" | "open-loop" => Ok(Self::OpenLoop),
            "position_mode" | "position-mode" | "position" => Ok(Self::PositionMode),
            other => Err(format!(
                "unknown controller {other:?} (expected proposed, open_loop or position_mode)"
            )),
        }
    }
}

/// Phase durations, seconds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TimingBudget {
    pub localize: f64,
    /// Also the quintic horizon `t_f` for approach and return.
    pub approach: f64,
    pub detach: f64,
}

impl Default for TimingBudget {
    fn default() -> Self {
        Self {
            localize: 0.3,
            approach: 2.0,
            detach: 1.0,
        }
    }
}

impl TimingBudget {
    pub fn validate(&self) -> Result<(), SimError> {
        for (name, v) in [
            ("localize", self.localize),
            ("approach", self.approach),
            ("detach", self.detach),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(SimError::InvalidConfig(format!(
                    "timing.{name} must be > 0, got {v}"
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimSettings {
    /// Control and integration step, s.
    pub dt: f64,
    /// Longest regulation window after the quintic ends, s.
    pub settle_max: f64,
    /// Settling stops early once the measured distance to the goal drops
    /// below this, m.
    pub settle_tolerance: f64,
    /// Trial success threshold on the final approach error, m.
    pub success_threshold: f64,
    pub home: JointState,
    /// Keep every n-th step in the trial log; 0 keeps none.
    pub log_decimation: usize,
    /// Localize through the synthetic camera; otherwise the true target is
    /// handed to the planner.
    pub use_perception: bool,
    pub range_samples: usize,
    pub fruit_radius: f64,
}

impl Default for SimSettings {
    fn default() -> Self {
        Self {
            dt: 1e-3,
            settle_max: 0.5,
            settle_tolerance: 1e-3,
            success_threshold: 0.02,
            home: JointState::default(),
            log_decimation: 1,
            use_perception: true,
            range_samples: 25,
            fruit_radius: 0.04,
        }
    }
}

/// Everything a trial needs besides the target, controller and seed.
#[derive(Debug, Clone, PartialEq)]
#[derive(Default)]
pub struct SimConfig {
    pub links: LinkParams,
    pub limits: JointLimits,
    pub gains: ControllerGains,
    pub plant: PlantModel,
    pub budget: TimingBudget,
    pub intrinsics: CameraIntrinsics,
    pub extrinsics: RigidTransform,
    pub settings: SimSettings,
}


impl SimConfig {
    pub fn with_plant(mut self, plant: PlantModel) -> Self {
        self.plant = plant;
        self
    }

    pub fn validate(&self) -> Result<(), SimError> {
        self.links.validate()?;
        self.limits.validate()?;
        self.gains.validate()?;
        self.plant.validate()?;
        self.budget.validate()?;
        self.intrinsics.validate()?;
        self.extrinsics.validate()?;
        let s = &self.settings;
        if !(s.dt.is_finite() && s.dt > 0.0 && s.dt <= 0.1) {
            return Err(SimError::InvalidConfig(format!("dt must be in (0, 0.1], got {}", s.dt)));
        }
        if !(s.settle_max.is_finite() && s.settle_max >= 0.0) {
            return Err(SimError::InvalidConfig("settle_max must be >= 0".into()));
        }
        if !(s.settle_tolerance.is_finite() && s.settle_tolerance >= 0.0) {
            return Err(SimError::InvalidConfig("settle_tolerance must be >= 0".into()));
        }
        if !(s.success_threshold.is_finite() && s.success_threshold > 0.0) {
            return Err(SimError::InvalidConfig("success_threshold must be > 0".into()));
        }
        if s.range_samples == 0 {
            return Err(SimError::InvalidConfig("range_samples must be >= 1".into()));
        }
        if !(s.fruit_radius.is_finite() && s.fruit_radius > 0.0) {
            return Err(SimError::InvalidConfig("fruit_radius must be > 0".into()));
        }
        let home = crate::kinematics::check_limits(&s.home, &self.limits);
        if !home.is_valid() {
            return Err(SimError::InvalidConfig(format!("home pose outside limits: {home}")));
        }
        Ok(())
    }
}
