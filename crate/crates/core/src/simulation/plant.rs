//! Actuator model and fixed-step integration.
//!
//! Revolute joints follow `q̇ = sat(bias·ω)`; the pneumatic carriage is a
//! first-order velocity lag behind a speed-saturated command. Integration is
//! classic RK4 over the state `(φ, θ, D, Ḋ)`. The command source is queried
//! at every RK4 stage, so a closed-loop law sees the stage state exactly as a
//! continuous-time controller would.

use crate::control::{ControlError, VelocityCommand};
use crate::kinematics::{check_limits, JointLimits, JointState, LimitReport};
use rand::Rng;
use rand_distr::{Distribution, Normal, Uniform};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use super::SimError;

const RPM_TO_RAD_S: f64 = 2.0 * PI / 60.0;
/// Motor top speed, RPM.
const MOTOR_MAX_RPM: f64 = 4000.0;
const PAN_GEAR_RATIO: f64 = 45.0;
const TILT_GEAR_RATIO: f64 = 80.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PlantModel {
    /// rad/s
    pub pan_rate_limit: f64,
    /// rad/s
    pub tilt_rate_limit: f64,
    /// Multiplier between commanded and realized pan rate.
    pub gain_bias_phi: f64,
    pub gain_bias_theta: f64,
    /// Relative std-dev of a per-trial draw around each gain bias.
    pub gain_bias_jitter: f64,
    /// Joint-side encoder resolution. `0` disables quantization.
    pub encoder_counts_per_rev: u32,
    /// s
    pub pneumatic_time_constant: f64,
    /// m/s
    pub pneumatic_speed_limit: f64,
    /// Range-sample noise, m.
    pub depth_noise_sigma: f64,
    /// Detected box-center noise, pixels.
    pub pixel_noise_sigma: f64,
    /// Proportional gain of the position-mode servo loop, 1/s.
    pub servo_gain: f64,
    /// Half-width of the position-mode servo in-position window, encoder
    /// counts. Each trial draws a settle offset uniformly inside it.
    pub servo_in_position_counts: f64,
    /// Distance past the joint limits at which integration is aborted, rad.
    pub hard_limit_margin_rad: f64,
    /// Same for the prismatic joint, m.
    pub hard_limit_margin_m: f64,
}

impl Default for PlantModel {
    fn default() -> Self {
        Self {
            pan_rate_limit: MOTOR_MAX_RPM / PAN_GEAR_RATIO * RPM_TO_RAD_S,
            tilt_rate_limit: MOTOR_MAX_RPM / TILT_GEAR_RATIO * RPM_TO_RAD_S,
            gain_bias_phi: 1.0,
            gain_bias_theta: 1.0,
            gain_bias_jitter: 0.0,
            encoder_counts_per_rev: 6400,
            pneumatic_time_constant: 0.05,
            pneumatic_speed_limit: 0.7,
            depth_noise_sigma: 0.0,
            pixel_noise_sigma: 0.0,
            servo_gain: 20.0,
            servo_in_position_counts: 3.0,
            hard_limit_margin_rad: 2f64.to_radians(),
            hard_limit_margin_m: 0.02,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlantPreset {
    /// Exact kinematic plant: unit gains, no quantization, no sensor noise.
    Ideal,
    /// Nominal hardware: quantized encoders, unbiased actuators.
    Nominal,
    /// Nominal plus 5% gain bias, gain jitter and perception noise.
    Perturbed,
}

impl PlantModel {
    pub fn ideal() -> Self {
        Self {
            encoder_counts_per_rev: 0,
            servo_in_position_counts: 0.0,
            ..Self::default()
        }
    }

    pub fn perturbed() -> Self {
        Self {
            gain_bias_phi: 1.05,
            gain_bias_theta: 1.05,
            gain_bias_jitter: 0.01,
            depth_noise_sigma: 0.005,
            pixel_noise_sigma: 0.5,
            ..Self::default()
        }
    }

    pub fn preset(p: PlantPreset) -> Self {
        match p {
            PlantPreset::Ideal => Self::ideal(),
            PlantPreset::Nominal => Self::default(),
            PlantPreset::Perturbed => Self::perturbed(),
        }
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let pos = |name: &str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(SimError::InvalidConfig(format!("plant.{name} must be > 0, got {v}")))
            }
        };
        let nonneg = |name: &str, v: f64| {
            if v.is_finite() && v >= 0.0 {
                Ok(())
            } else {
                Err(SimError::InvalidConfig(format!("plant.{name} must be >= 0, got {v}")))
            }
        };
        pos("pan_rate_limit", self.pan_rate_limit)?;
        pos("tilt_rate_limit", self.tilt_rate_limit)?;
        pos("gain_bias_phi", self.gain_bias_phi)?;
        pos("gain_bias_theta", self.gain_bias_theta)?;
        pos("pneumatic_time_constant", self.pneumatic_time_constant)?;
        pos("pneumatic_speed_limit", self.pneumatic_speed_limit)?;
        pos("servo_gain", self.servo_gain)?;
        nonneg("gain_bias_jitter", self.gain_bias_jitter)?;
        nonneg("depth_noise_sigma", self.depth_noise_sigma)?;
        nonneg("pixel_noise_sigma", self.pixel_noise_sigma)?;
        nonneg("servo_in_position_counts", self.servo_in_position_counts)?;
        nonneg("hard_limit_margin_rad", self.hard_limit_margin_rad)?;
        nonneg("hard_limit_margin_m", self.hard_limit_margin_m)?;
        if self.gain_bias_jitter >= 0.5 {
            return Err(SimError::InvalidConfig(
                "plant.gain_bias_jitter must be < 0.5".into(),
            ));
        }
        Ok(())
    }

    /// Encoder resolution in radians, `None` when quantization is off.
    pub fn encoder_resolution(&self) -> Option<f64> {
        (self.encoder_counts_per_rev > 0).then(|| 2.0 * PI / self.encoder_counts_per_rev as f64)
    }

    /// Draw the per-trial actuator realization.
    pub fn realize<R: Rng + ?Sized>(&self, rng: &mut R) -> Actuators {
        let mut bias = [self.gain_bias_phi, self.gain_bias_theta];
        if self.gain_bias_jitter > 0.0 {
            let n = Normal::new(0.0, self.gain_bias_jitter).expect("validated jitter");
            for b in &mut bias {
                // keep the draw positive and bounded
                *b *= 1.0 + n.sample(rng).clamp(-3.0 * self.gain_bias_jitter, 3.0 * self.gain_bias_jitter);
            }
        }
        let mut servo_offset = [0.0; 2];
        if let Some(res) = self.encoder_resolution() {
            if self.servo_in_position_counts > 0.0 {
                let w = self.servo_in_position_counts * res;
                let u = Uniform::new_inclusive(-w, w).expect("finite window");
                for o in &mut servo_offset {
                    *o = u.sample(rng);
                }
            }
        }
        Actuators {
            model: PlantModel {
                gain_bias_phi: bias[0],
                gain_bias_theta: bias[1],
                gain_bias_jitter: 0.0,
                ..*self
            },
            servo_offset_phi: servo_offset[0],
            servo_offset_theta: servo_offset[1],
        }
    }

    /// What the joint encoders report for the true state.
    pub fn measure(&self, q: &JointState) -> JointState {
        match self.encoder_resolution() {
            Some(res) => JointState {
                phi: (q.phi / res).round() * res,
                theta: (q.theta / res).round() * res,
                d_prismatic: q.d_prismatic,
            },
            None => *q,
        }
    }
}

/// A plant with its per-trial random draws fixed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Actuators {
    pub model: PlantModel,
    /// Where the position-mode servo settles relative to its setpoint, rad.
    pub servo_offset_phi: f64,
    pub servo_offset_theta: f64,
}

impl Actuators {
    /// Realization with no random draws (jitter ignored, offsets zero).
    pub fn nominal(model: &PlantModel) -> Self {
        Self {
            model: PlantModel {
                gain_bias_jitter: 0.0,
                ..*model
            },
            servo_offset_phi: 0.0,
            servo_offset_theta: 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Idle,
    Localize,
    Approach,
    Detach,
    Return,
    Done,
    Failed,
}

impl Phase {
    /// Legal edges of the harvest-cycle machine.
    pub fn can_transition_to(self, next: Phase) -> bool {
        use Phase::*;
        matches!(
            (self, next),
            (Idle, Localize)
                | (Localize, Approach)
                | (Approach, Detach)
                | (Detach, Return)
                | (Return, Done)
                | (Idle | Localize | Approach | Detach | Return, Failed)
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimState {
    pub t: f64,
    /// True joint state.
    pub q: JointState,
    /// Encoder reading of `q`.
    pub q_measured: JointState,
    /// Carriage velocity, m/s.
    pub carriage_velocity: f64,
    /// PI integral, m·s.
    pub pi_integral: f64,
    pub phase: Phase,
}

impl SimState {
    pub fn at_rest(q: JointState, plant: &PlantModel) -> Self {
        Self {
            t: 0.0,
            q,
            q_measured: plant.measure(&q),
            carriage_velocity: 0.0,
            pi_integral: 0.0,
            phase: Phase::Idle,
        }
    }
}

/// Revolute rate command plus prismatic speed command (m/s).
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Commands {
    pub velocity: VelocityCommand,
    pub prismatic: f64,
}

/// Actual joint rates at the start of a step.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct AppliedRates {
    pub phi_dot: f64,
    pub theta_dot: f64,
    pub d_dot: f64,
    /// Commands as produced by the source, before bias and saturation.
    pub commanded: Commands,
}

type Vec4 = [f64; 4];

fn derivative(x: &Vec4, cmd: &Commands, plant: &PlantModel) -> Vec4 {
    let phi_dot = (plant.gain_bias_phi * cmd.velocity.omega_phi)
        .clamp(-plant.pan_rate_limit, plant.pan_rate_limit);
    let theta_dot = (plant.gain_bias_theta * cmd.velocity.omega_theta)
        .clamp(-plant.tilt_rate_limit, plant.tilt_rate_limit);
    let u = cmd
        .prismatic
        .clamp(-plant.pneumatic_speed_limit, plant.pneumatic_speed_limit);
    let v_dot = (u - x[3]) / plant.pneumatic_time_constant;
    [phi_dot, theta_dot, x[3], v_dot]
}

fn axpy(x: &Vec4, h: f64, k: &Vec4) -> Vec4 {
    [x[0] + h * k[0], x[1] + h * k[1], x[2] + h * k[2], x[3] + h * k[3]]
}

fn joints(x: &Vec4) -> JointState {
    JointState::new(x[0], x[1], x[2])
}

/// Hard limits: the configured joint limits widened by the plant margins.
pub fn hard_limit_report(q: &JointState, limits: &JointLimits, plant: &PlantModel) -> LimitReport {
    let mut hard = *limits;
    hard.phi.lower -= plant.hard_limit_margin_rad;
    hard.phi.upper += plant.hard_limit_margin_rad;
    hard.theta.lower -= plant.hard_limit_margin_rad;
    hard.theta.upper += plant.hard_limit_margin_rad;
    hard.d_prismatic.lower -= plant.hard_limit_margin_m;
    hard.d_prismatic.upper += plant.hard_limit_margin_m;
    check_limits(q, &hard)
}

/// Advance one step with commands produced by `source(t, q_measured)` at
/// each RK4 stage.
pub fn step_with<F>(
    state: &SimState,
    plant: &PlantModel,
    limits: &JointLimits,
    dt: f64,
    mut source: F,
) -> Result<(SimState, AppliedRates), SimError>
where
    F: FnMut(f64, &JointState) -> Result<Commands, ControlError>,
{
    if !(dt.is_finite() && dt > 0.0) {
        return Err(SimError::InvalidConfig(format!("dt must be > 0, got {dt}")));
    }
    let x0: Vec4 = [
        state.q.phi,
        state.q.theta,
        state.q.d_prismatic,
        state.carriage_velocity,
    ];
    let t0 = state.t;
    let mut eval = |t: f64, x: &Vec4| -> Result<(Vec4, Commands), SimError> {
        let meas = plant.measure(&joints(x));
        let cmd = source(t, &meas)?;
        Ok((derivative(x, &cmd, plant), cmd))
    };
    let (k1, c1) = eval(t0, &x0)?;
    let (k2, _) = eval(t0 + 0.5 * dt, &axpy(&x0, 0.5 * dt, &k1))?;
    let (k3, _) = eval(t0 + 0.5 * dt, &axpy(&x0, 0.5 * dt, &k2))?;
    let (k4, _) = eval(t0 + dt, &axpy(&x0, dt, &k3))?;
    let mut x1 = x0;
    for i in 0..4 {
        x1[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    }
    let q = joints(&x1);
    let report = hard_limit_report(&q, limits, plant);
    if !report.is_valid() {
        return Err(SimError::LimitBreach(report));
    }
    let next = SimState {
        t: t0 + dt,
        q,
        q_measured: plant.measure(&q),
        carriage_velocity: x1[3],
        pi_integral: state.pi_integral,
        phase: state.phase,
    };
    let applied = AppliedRates {
        phi_dot: k1[0],
        theta_dot: k1[1],
        d_dot: k1[2],
        commanded: c1,
    };
    Ok((next, applied))
}

/// Advance one step holding `commands` constant.
pub fn step(
    state: &SimState,
    commands: &Commands,
    plant: &PlantModel,
    limits: &JointLimits,
    dt: f64,
) -> Result<SimState, SimError> {
    step_with(state, plant, limits, dt, |_, _| Ok(*commands)).map(|(s, _)| s)
}
