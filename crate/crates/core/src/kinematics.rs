//! Geometric model of the pan/tilt/prismatic arm.
//!
//! Base frame convention: `x` runs along the prismatic stroke, `y` is moved by
//! the pan joint and `z` by the tilt joint. The closed forms below are the
//! whole model; there is no general serial-chain machinery.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Uniform};
use serde::{Deserialize, Serialize};
use std::fmt;
use thiserror::Error;

/// Default interior tolerance applied to joint limit checks.
pub const DEFAULT_LIMIT_MARGIN: f64 = 1e-6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum KinematicsError {
    #[error("target out of reach: {0}")]
    OutOfReach(String),
    #[error("joint limit violation: {0}")]
    LimitViolation(LimitReport),
    #[error("invalid link parameters: {0}")]
    InvalidLinks(String),
    #[error("invalid joint limits: {0}")]
    InvalidLimits(String),
}

/// Link lengths in meters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LinkParams {
    pub d1: f64,
    pub d2: f64,
    pub d3: f64,
}

impl Default for LinkParams {
    fn default() -> Self {
        Self {
            d1: 0.0635,
            d2: 0.0889,
            d3: 0.6985,
        }
    }
}

impl LinkParams {
    pub fn new(d1: f64, d2: f64, d3: f64) -> Result<Self, KinematicsError> {
        let p = Self { d1, d2, d3 };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<(), KinematicsError> {
        for (name, v) in [("d1", self.d1), ("d2", self.d2), ("d3", self.d3)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(KinematicsError::InvalidLinks(format!(
                    "{name} must be finite and > 0, got {v}"
                )));
            }
        }
        Ok(())
    }
}

/// Joint vector: pan angle, tilt angle (radians) and prismatic extension (meters).
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct JointState {
    pub phi: f64,
    pub theta: f64,
    pub d_prismatic: f64,
}

impl JointState {
    pub const fn new(phi: f64, theta: f64, d_prismatic: f64) -> Self {
        Self {
            phi,
            theta,
            d_prismatic,
        }
    }

    pub fn from_degrees(phi_deg: f64, theta_deg: f64, d_prismatic: f64) -> Self {
        Self::new(phi_deg.to_radians(), theta_deg.to_radians(), d_prismatic)
    }

    pub fn to_array(self) -> [f64; 3] {
        [self.phi, self.theta, self.d_prismatic]
    }
}

/// Position in the manipulator base frame, meters.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct CartesianPoint {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl CartesianPoint {
    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }

    pub fn distance(&self, other: &CartesianPoint) -> f64 {
        ((self.x - other.x).powi(2) + (self.y - other.y).powi(2) + (self.z - other.z).powi(2))
            .sqrt()
    }

    pub fn to_array(self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }
}

/// A closed interval `[lower, upper]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lower: f64,
    pub upper: f64,
}

impl Interval {
    pub const fn new(lower: f64, upper: f64) -> Self {
        Self { lower, upper }
    }

    fn contains(&self, v: f64, margin: f64) -> bool {
        v >= self.lower - margin && v <= self.upper + margin
    }

    fn shrink(&self, margin: f64) -> Interval {
        Interval::new(self.lower + margin, self.upper - margin)
    }

    pub fn scaled(&self, factor: f64) -> Interval {
        let mid = 0.5 * (self.lower + self.upper);
        let half = 0.5 * (self.upper - self.lower) * factor;
        Interval::new(mid - half, mid + half)
    }
}

/// Per-joint limits. Angles in radians, prismatic in meters.
///
/// The mechanical limits are open intervals; they are checked here as closed
/// intervals, accepting values up to `margin` past either bound so round-off
/// on a boundary pose (e.g. the retracted carriage at `D = 0`) does not flip
/// the verdict.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JointLimits {
    pub phi: Interval,
    pub theta: Interval,
    pub d_prismatic: Interval,
    pub margin: f64,
}

impl Default for JointLimits {
    fn default() -> Self {
        let rev = 25f64.to_radians();
        Self {
            phi: Interval::new(-rev, rev),
            theta: Interval::new(-rev, rev),
            d_prismatic: Interval::new(0.0, 0.61),
            margin: DEFAULT_LIMIT_MARGIN,
        }
    }
}

impl JointLimits {
    pub fn validate(&self) -> Result<(), KinematicsError> {
        for (name, iv) in [
            ("phi", self.phi),
            ("theta", self.theta),
            ("d_prismatic", self.d_prismatic),
        ] {
            if !(iv.lower.is_finite() && iv.upper.is_finite() && iv.lower < iv.upper) {
                return Err(KinematicsError::InvalidLimits(format!(
                    "{name}: lower must be < upper (got {} .. {})",
                    iv.lower, iv.upper
                )));
            }
        }
        if !(self.margin.is_finite() && self.margin >= 0.0) {
            return Err(KinematicsError::InvalidLimits(format!(
                "margin must be >= 0, got {}",
                self.margin
            )));
        }
        Ok(())
    }

    /// Same limits with both revolute joints set to `±deg`.
    pub fn with_revolute_deg(mut self, deg: f64) -> Self {
        let r = deg.to_radians();
        self.phi = Interval::new(-r, r);
        self.theta = Interval::new(-r, r);
        self
    }

    /// Limits shrunk about their midpoints by `factor` (0 < factor <= 1).
    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            phi: self.phi.scaled(factor),
            theta: self.theta.scaled(factor),
            d_prismatic: self.d_prismatic.scaled(factor),
            margin: self.margin,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Joint {
    Pan,
    Tilt,
    Prismatic,
}

impl fmt::Display for Joint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Joint::Pan => "pan",
            Joint::Tilt => "tilt",
            Joint::Prismatic => "prismatic",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JointViolation {
    pub joint: Joint,
    pub value: f64,
    pub lower: f64,
    pub upper: f64,
}

/// Result of [`check_limits`]: empty `violations` means the state is valid.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct LimitReport {
    pub violations: Vec<JointViolation>,
}

impl LimitReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn violates(&self, joint: Joint) -> bool {
        self.violations.iter().any(|v| v.joint == joint)
    }
}

impl fmt::Display for LimitReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.violations.is_empty() {
            return f.write_str("within limits");
        }
        for (i, v) in self.violations.iter().enumerate() {
            if i > 0 {
                f.write_str("; ")?;
            }
            match v.joint {
                Joint::Prismatic => write!(
                    f,
                    "{} = {:.4} m outside [{:.4}, {:.4}] m",
                    v.joint, v.value, v.lower, v.upper
                )?,
                _ => write!(
                    f,
                    "{} = {:.2} deg outside [{:.2}, {:.2}] deg",
                    v.joint,
                    v.value.to_degrees(),
                    v.lower.to_degrees(),
                    v.upper.to_degrees()
                )?,
            }
        }
        Ok(())
    }
}

pub fn forward_kinematics(q: &JointState, links: &LinkParams) -> CartesianPoint {
    let (sp, cp) = q.phi.sin_cos();
    let (st, ct) = q.theta.sin_cos();
    CartesianPoint {
        x: links.d3 * ct * cp + q.d_prismatic,
        y: links.d3 * sp + links.d2,
        z: -links.d3 * st * cp + links.d1,
    }
}

/// Closed-form inverse on the principal `asin` branch, then a limit check.
pub fn inverse_kinematics(
    p: &CartesianPoint,
    links: &LinkParams,
    limits: &JointLimits,
) -> Result<JointState, KinematicsError> {
    let q = inverse_kinematics_unchecked(p, links)?;
    let report = check_limits(&q, limits);
    if report.is_valid() {
        Ok(q)
    } else {
        Err(KinematicsError::LimitViolation(report))
    }
}

/// Inverse kinematics without the joint-limit check. Still fails when an
/// `asin` argument leaves `[-1, 1]`.
pub fn inverse_kinematics_unchecked(
    p: &CartesianPoint,
    links: &LinkParams,
) -> Result<JointState, KinematicsError> {
    if !p.is_finite() {
        return Err(KinematicsError::OutOfReach(format!("non-finite target {p:?}")));
    }
    let s_phi = (p.y - links.d2) / links.d3;
    if s_phi.abs() > 1.0 {
        return Err(KinematicsError::OutOfReach(format!(
            "|y - d2| = {:.4} m exceeds d3 = {:.4} m",
            (p.y - links.d2).abs(),
            links.d3
        )));
    }
    let phi = s_phi.asin();
    let reach = links.d3 * phi.cos();
    let s_theta = (links.d1 - p.z) / reach;
    if !s_theta.is_finite() || s_theta.abs() > 1.0 {
        return Err(KinematicsError::OutOfReach(format!(
            "|d1 - z| = {:.4} m exceeds d3*cos(phi) = {:.4} m",
            (links.d1 - p.z).abs(),
            reach
        )));
    }
    let theta = s_theta.asin();
    let d_prismatic = p.x - links.d3 * theta.cos() * phi.cos();
    Ok(JointState {
        phi,
        theta,
        d_prismatic,
    })
}

/// End-effector `(ẏ, ż)` produced by revolute rates `(ω_φ, ω_θ)`.
pub fn velocity_map(
    q: &JointState,
    omega_phi: f64,
    omega_theta: f64,
    links: &LinkParams,
) -> (f64, f64) {
    let (sp, cp) = q.phi.sin_cos();
    let (st, ct) = q.theta.sin_cos();
    let ydot = links.d3 * cp * omega_phi;
    let zdot = -links.d3 * ct * cp * omega_theta + links.d3 * st * sp * omega_phi;
    (ydot, zdot)
}

pub fn check_limits(q: &JointState, limits: &JointLimits) -> LimitReport {
    let mut violations = Vec::new();
    for (joint, value, iv) in [
        (Joint::Pan, q.phi, limits.phi),
        (Joint::Tilt, q.theta, limits.theta),
        (Joint::Prismatic, q.d_prismatic, limits.d_prismatic),
    ] {
        if !iv.contains(value, limits.margin) {
            violations.push(JointViolation {
                joint,
                value,
                lower: iv.lower,
                upper: iv.upper,
            });
        }
    }
    LimitReport { violations }
}

/// Uniformly sample joint states strictly inside `limits` (shrunk by the
/// margin) and map them through forward kinematics.
pub fn sample_workspace(
    limits: &JointLimits,
    links: &LinkParams,
    n: usize,
    seed: u64,
) -> Vec<CartesianPoint> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    sample_joint_states(limits, n, &mut rng)
        .iter()
        .map(|q| forward_kinematics(q, links))
        .collect()
}

pub(crate) fn sample_joint_states(
    limits: &JointLimits,
    n: usize,
    rng: &mut ChaCha8Rng,
) -> Vec<JointState> {
    let m = limits.margin;
    let dist = |iv: Interval| {
        let s = iv.shrink(m);
        Uniform::new_inclusive(s.lower, s.upper).expect("validated limits")
    };
    let (dp, dt, dd) = (dist(limits.phi), dist(limits.theta), dist(limits.d_prismatic));
    (0..n)
        .map(|_| JointState {
            phi: dp.sample(rng),
            theta: dt.sample(rng),
            d_prismatic: dd.sample(rng),
        })
        .collect()
}
