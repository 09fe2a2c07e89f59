//! Rest-to-rest quintic reference trajectories for the `y` and `z` axes.

use crate::kinematics::CartesianPoint;
use serde::{Deserialize, Serialize};
use std::io::{self, Write};
use thiserror::Error;

/// Default approach horizon, seconds.
pub const DEFAULT_HORIZON: f64 = 2.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TrajectoryError {
    #[error("invalid horizon t_f = {0} (must be finite and > 0)")]
    InvalidHorizon(f64),
}

/// One axis of a quintic `p(t) = Σ a_i t^i`, `t ∈ [0, t_f]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuinticAxis {
    pub coeffs: [f64; 6],
    pub t_f: f64,
    pub start: f64,
    pub goal: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ReferenceSample {
    pub t: f64,
    pub position: f64,
    pub velocity: f64,
    pub acceleration: f64,
}

impl ReferenceSample {
    /// A stationary reference at `position`.
    pub fn hold(t: f64, position: f64) -> Self {
        Self {
            t,
            position,
            velocity: 0.0,
            acceleration: 0.0,
        }
    }
}

pub fn plan_quintic(p0: f64, pf: f64, t_f: f64) -> Result<QuinticAxis, TrajectoryError> {
    if !(t_f.is_finite() && t_f > 0.0) {
        return Err(TrajectoryError::InvalidHorizon(t_f));
    }
    let delta = pf - p0;
    let t3 = t_f * t_f * t_f;
    Ok(QuinticAxis {
        coeffs: [
            p0,
            0.0,
            0.0,
            10.0 * delta / t3,
            -15.0 * delta / (t3 * t_f),
            6.0 * delta / (t3 * t_f * t_f),
        ],
        t_f,
        start: p0,
        goal: pf,
    })
}

/// Evaluate position and its first two derivatives. Times outside
/// `[0, t_f]` are clamped, so the reference holds its endpoints.
pub fn eval_quintic(axis: &QuinticAxis, t: f64) -> ReferenceSample {
    let tc = t.clamp(0.0, axis.t_f);
    let a = &axis.coeffs;
    let position = a[0] + tc * (a[1] + tc * (a[2] + tc * (a[3] + tc * (a[4] + tc * a[5]))));
    let velocity =
        a[1] + tc * (2.0 * a[2] + tc * (3.0 * a[3] + tc * (4.0 * a[4] + tc * 5.0 * a[5])));
    let acceleration = 2.0 * a[2] + tc * (6.0 * a[3] + tc * (12.0 * a[4] + tc * 20.0 * a[5]));
    ReferenceSample {
        t: tc,
        position,
        velocity,
        acceleration,
    }
}

impl QuinticAxis {
    pub fn eval(&self, t: f64) -> ReferenceSample {
        eval_quintic(self, t)
    }

    /// Peak |velocity|, reached at `t_f / 2`.
    pub fn peak_speed(&self) -> f64 {
        1.875 * (self.goal - self.start).abs() / self.t_f
    }
}

/// Reference for the two revolute-driven axes. `x` is not planned; the
/// prismatic joint is regulated separately.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CartesianReference {
    pub y: QuinticAxis,
    pub z: QuinticAxis,
}

impl CartesianReference {
    pub fn t_f(&self) -> f64 {
        self.y.t_f
    }

    pub fn eval(&self, t: f64) -> (ReferenceSample, ReferenceSample) {
        (self.y.eval(t), self.z.eval(t))
    }

    /// Write `t,y_r,z_r,ydot_r,zdot_r` sampled every `dt` over `[0, t_f]`.
    pub fn write_csv<W: Write>(&self, mut w: W, dt: f64) -> io::Result<()> {
        writeln!(w, "t,y_r,z_r,ydot_r,zdot_r")?;
        let steps = (self.t_f() / dt).round().max(1.0) as usize;
        for i in 0..=steps {
            let t = i as f64 * self.t_f() / steps as f64;
            let (ry, rz) = self.eval(t);
            writeln!(
                w,
                "{},{},{},{},{}",
                t, ry.position, rz.position, ry.velocity, rz.velocity
            )?;
        }
        Ok(())
    }
}

pub fn plan_cartesian_reference(
    start: &CartesianPoint,
    goal: &CartesianPoint,
    t_f: f64,
) -> Result<CartesianReference, TrajectoryError> {
    Ok(CartesianReference {
        y: plan_quintic(start.y, goal.y, t_f)?,
        z: plan_quintic(start.z, goal.z, t_f)?,
    })
}
