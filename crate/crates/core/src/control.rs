//! Revolute-joint control laws, the prismatic PI loop and Lyapunov
//! diagnostics.
//!
//! All controllers are pure functions of explicit state. The PI integral is
//! passed in and returned rather than stored.

use crate::kinematics::{forward_kinematics, CartesianPoint, JointState, LinkParams};
use crate::trajectory::{plan_quintic, ReferenceSample, TrajectoryError};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ControlError {
    #[error("singularity guard tripped: phi = {phi_deg:.2} deg, theta = {theta_deg:.2} deg")]
    SingularityGuard { phi_deg: f64, theta_deg: f64 },
    #[error("invalid controller gains: {0}")]
    InvalidGains(String),
    #[error(transparent)]
    Trajectory(#[from] TrajectoryError),
}

/// `e_y = y - y_r`, `e_z = z - z_r`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct TrackingError {
    pub e_y: f64,
    pub e_z: f64,
}

impl TrackingError {
    pub fn norm(&self) -> f64 {
        self.e_y.hypot(self.e_z)
    }
}

/// Revolute joint rate command, rad/s.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct VelocityCommand {
    pub omega_phi: f64,
    pub omega_theta: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ControllerGains {
    /// `y` error gain, 1/s.
    pub k1: f64,
    /// `z` error gain, 1/s.
    pub k2: f64,
    /// Prismatic proportional gain, (m/s)/m.
    pub kp_prismatic: f64,
    /// Prismatic integral gain, (m/s)/(m·s).
    pub ki_prismatic: f64,
    /// Largest |angle| at which the revolute laws may still divide by its
    /// cosine, radians.
    pub singularity_guard: f64,
    /// Bound on the PI output used for anti-windup, m/s.
    pub prismatic_output_limit: f64,
}

impl Default for ControllerGains {
    fn default() -> Self {
        Self {
            k1: 5.0,
            k2: 5.0,
            kp_prismatic: 6.0,
            ki_prismatic: 0.05,
            singularity_guard: 80f64.to_radians(),
            prismatic_output_limit: 0.7,
        }
    }
}

impl ControllerGains {
    pub fn new(k1: f64, k2: f64) -> Result<Self, ControlError> {
        let g = Self {
            k1,
            k2,
            ..Self::default()
        };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<(), ControlError> {
        let bad = |m: String| Err(ControlError::InvalidGains(m));
        if !(self.k1.is_finite() && self.k1 > 0.0) {
            return bad(format!("k1 must be > 0, got {}", self.k1));
        }
        if !(self.k2.is_finite() && self.k2 > 0.0) {
            return bad(format!("k2 must be > 0, got {}", self.k2));
        }
        if !(self.kp_prismatic.is_finite() && self.kp_prismatic >= 0.0) {
            return bad(format!("kp_prismatic must be >= 0, got {}", self.kp_prismatic));
        }
        if !(self.ki_prismatic.is_finite() && self.ki_prismatic >= 0.0) {
            return bad(format!("ki_prismatic must be >= 0, got {}", self.ki_prismatic));
        }
        if !(self.singularity_guard > 0.0 && self.singularity_guard < std::f64::consts::FRAC_PI_2)
        {
            return bad(format!(
                "singularity_guard must be in (0, pi/2), got {}",
                self.singularity_guard
            ));
        }
        if !(self.prismatic_output_limit.is_finite() && self.prismatic_output_limit > 0.0) {
            return bad(format!(
                "prismatic_output_limit must be > 0, got {}",
                self.prismatic_output_limit
            ));
        }
        Ok(())
    }
}

/// `V = ½(e_y² + e_z²)` and its analytic derivative along the closed loop.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct LyapunovSample {
    pub v: f64,
    pub vdot_analytic: f64,
}

pub fn tracking_error(
    p: &CartesianPoint,
    ref_y: &ReferenceSample,
    ref_z: &ReferenceSample,
) -> TrackingError {
    TrackingError {
        e_y: p.y - ref_y.position,
        e_z: p.z - ref_z.position,
    }
}

fn guarded_cosines(q: &JointState, guard: f64) -> Result<(f64, f64), ControlError> {
    let (cp, ct) = (q.phi.cos(), q.theta.cos());
    let floor = guard.cos();
    if !(cp.abs() > floor && ct.abs() > floor) {
        return Err(ControlError::SingularityGuard {
            phi_deg: q.phi.to_degrees(),
            theta_deg: q.theta.to_degrees(),
        });
    }
    Ok((cp, ct))
}

/// Feedback-linearizing law: substituted into the velocity map it yields
/// `ė_y = -k1·e_y`, `ė_z = -k2·e_z`.
pub fn velocity_controller(
    q: &JointState,
    err: &TrackingError,
    ref_y: &ReferenceSample,
    ref_z: &ReferenceSample,
    gains: &ControllerGains,
    links: &LinkParams,
) -> Result<VelocityCommand, ControlError> {
    let (cp, ct) = guarded_cosines(q, gains.singularity_guard)?;
    let d3 = links.d3;
    let omega_phi = (-gains.k1 * err.e_y + ref_y.velocity) / (d3 * cp);
    let omega_theta = (gains.k2 * err.e_z + d3 * q.theta.sin() * q.phi.sin() * omega_phi
        - ref_z.velocity)
        / (d3 * ct * cp);
    Ok(VelocityCommand {
        omega_phi,
        omega_theta,
    })
}

/// Feedforward-only benchmark: the velocity law with the error terms removed.
pub fn open_loop_velocity_controller(
    q: &JointState,
    ref_y: &ReferenceSample,
    ref_z: &ReferenceSample,
    links: &LinkParams,
    singularity_guard: f64,
) -> Result<VelocityCommand, ControlError> {
    let (cp, ct) = guarded_cosines(q, singularity_guard)?;
    let d3 = links.d3;
    let omega_phi = ref_y.velocity / (d3 * cp);
    let omega_theta =
        (d3 * q.theta.sin() * q.phi.sin() * omega_phi - ref_z.velocity) / (d3 * ct * cp);
    Ok(VelocityCommand {
        omega_phi,
        omega_theta,
    })
}

/// Joint-space setpoint for the position-mode benchmark.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct JointSetpoint {
    pub position: JointState,
    pub velocity: JointState,
}

/// Position-mode benchmark setpoint: independent rest-to-rest quintics from
/// `q0` to `q_desired` on the two revolute joints. The prismatic entry is
/// passed through from `q_desired`; that joint has its own loop.
pub fn position_mode_controller(
    q_desired: &JointState,
    t: f64,
    t_f: f64,
    q0: &JointState,
) -> Result<JointSetpoint, ControlError> {
    let phi = plan_quintic(q0.phi, q_desired.phi, t_f)?.eval(t);
    let theta = plan_quintic(q0.theta, q_desired.theta, t_f)?.eval(t);
    Ok(JointSetpoint {
        position: JointState::new(phi.position, theta.position, q_desired.d_prismatic),
        velocity: JointState::new(phi.velocity, theta.velocity, 0.0),
    })
}

/// PI loop state for the prismatic joint.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct PrismaticState {
    /// Measured carriage position, m.
    pub d: f64,
    /// Accumulated position error, m·s.
    pub integral: f64,
}

/// One PI update. Returns `(command m/s, new integral)`.
///
/// The integral advances by the rectangle rule, is held while the output
/// would exceed `prismatic_output_limit` (conditional integration) and is
/// clamped so that `ki·|integral| <= prismatic_output_limit`.
pub fn pi_prismatic_controller(
    state: &PrismaticState,
    d_desired: f64,
    dt: f64,
    gains: &ControllerGains,
) -> (f64, f64) {
    debug_assert!(dt > 0.0);
    let err = d_desired - state.d;
    let limit = gains.prismatic_output_limit;
    let mut integral = state.integral;
    if gains.ki_prismatic > 0.0 {
        let bound = limit / gains.ki_prismatic;
        let candidate = (integral + err * dt).clamp(-bound, bound);
        let out = gains.kp_prismatic * err + gains.ki_prismatic * candidate;
        if out.abs() <= limit {
            integral = candidate;
        }
        integral = integral.clamp(-bound, bound);
    }
    let command = gains.kp_prismatic * err + gains.ki_prismatic * integral;
    (command, integral)
}

pub fn lyapunov_sample(err: &TrackingError, gains: &ControllerGains) -> LyapunovSample {
    LyapunovSample {
        v: 0.5 * (err.e_y * err.e_y + err.e_z * err.e_z),
        vdot_analytic: -gains.k1 * err.e_y * err.e_y - gains.k2 * err.e_z * err.e_z,
    }
}

/// Convenience for callers holding a joint state instead of a position.
pub fn tracking_error_at(
    q: &JointState,
    links: &LinkParams,
    ref_y: &ReferenceSample,
    ref_z: &ReferenceSample,
) -> TrackingError {
    tracking_error(&forward_kinematics(q, links), ref_y, ref_z)
}
