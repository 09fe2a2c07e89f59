//! Synthetic perception: a detection (bounding box plus range samples) is
//! turned into a base-frame target by mean-depth pinhole back-projection and
//! a rigid camera-to-base transform.

use crate::kinematics::CartesianPoint;
use nalgebra::{Matrix3, Vector3};
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;
use thiserror::Error;

const ORTHONORMAL_TOL: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PerceptionError {
    #[error("detection has no valid depth samples")]
    NoValidDepth,
    #[error("target is out of view: {0}")]
    OutOfView(String),
    #[error("invalid transform: {0}")]
    InvalidTransform(String),
    #[error("invalid camera intrinsics: {0}")]
    InvalidIntrinsics(String),
    #[error("invalid detection: {0}")]
    InvalidDetection(String),
}

/// Undistorted pinhole model, pixels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CameraIntrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: u32,
    pub height: u32,
}

impl Default for CameraIntrinsics {
    /// Roughly a 1280x720 active-stereo color stream.
    fn default() -> Self {
        Self {
            fx: 920.0,
            fy: 920.0,
            cx: 640.0,
            cy: 360.0,
            width: 1280,
            height: 720,
        }
    }
}

impl CameraIntrinsics {
    pub fn validate(&self) -> Result<(), PerceptionError> {
        if !(self.fx > 0.0 && self.fy > 0.0 && self.fx.is_finite() && self.fy.is_finite()) {
            return Err(PerceptionError::InvalidIntrinsics(format!(
                "focal lengths must be > 0 (fx = {}, fy = {})",
                self.fx, self.fy
            )));
        }
        if !(self.cx >= 0.0 && self.cx < self.width as f64) {
            return Err(PerceptionError::InvalidIntrinsics(format!(
                "cx = {} outside [0, {})",
                self.cx, self.width
            )));
        }
        if !(self.cy >= 0.0 && self.cy < self.height as f64) {
            return Err(PerceptionError::InvalidIntrinsics(format!(
                "cy = {} outside [0, {})",
                self.cy, self.height
            )));
        }
        Ok(())
    }

    fn in_image(&self, u: f64, v: f64) -> bool {
        u >= 0.0 && u < self.width as f64 && v >= 0.0 && v < self.height as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundingBox {
    pub u_min: f64,
    pub v_min: f64,
    pub u_max: f64,
    pub v_max: f64,
}

impl BoundingBox {
    pub fn center(&self) -> (f64, f64) {
        (
            0.5 * (self.u_min + self.u_max),
            0.5 * (self.v_min + self.v_max),
        )
    }
}

/// A detection. Range samples that are non-finite or `<= 0` are dropouts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    pub bbox: BoundingBox,
    pub range: Vec<f64>,
}

fn valid_depth(d: f64) -> bool {
    d.is_finite() && d > 0.0
}

impl Detection {
    pub fn new(bbox: BoundingBox, range: Vec<f64>) -> Result<Self, PerceptionError> {
        if !(bbox.u_min < bbox.u_max && bbox.v_min < bbox.v_max) {
            return Err(PerceptionError::InvalidDetection(format!(
                "degenerate bounding box {bbox:?}"
            )));
        }
        Ok(Self { bbox, range })
    }

    /// Parse `u_min,v_min,u_max,v_max,depth,depth,...`. Depth tokens may be
    /// `nan` or `0` for dropouts.
    pub fn parse_line(line: &str) -> Result<Self, PerceptionError> {
        let fields: Vec<f64> = line
            .split(',')
            .map(|s| {
                s.trim().parse::<f64>().map_err(|e| {
                    PerceptionError::InvalidDetection(format!("bad number {:?}: {e}", s.trim()))
                })
            })
            .collect::<Result<_, _>>()?;
        if fields.len() < 5 {
            return Err(PerceptionError::InvalidDetection(format!(
                "expected 4 bbox fields and at least one depth, got {} fields",
                fields.len()
            )));
        }
        let bbox = BoundingBox {
            u_min: fields[0],
            v_min: fields[1],
            u_max: fields[2],
            v_max: fields[3],
        };
        Self::new(bbox, fields[4..].to_vec())
    }

    /// Parse one detection per non-empty, non-`#` line.
    pub fn parse_many(text: &str) -> Result<Vec<Self>, PerceptionError> {
        text.lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'))
            .map(Self::parse_line)
            .collect()
    }

    pub fn to_line(&self) -> String {
        let mut s = format!(
            "{},{},{},{}",
            self.bbox.u_min, self.bbox.v_min, self.bbox.u_max, self.bbox.v_max
        );
        for d in &self.range {
            let _ = write!(s, ",{d}");
        }
        s
    }
}

/// Rigid transform `p_base = R·p_cam + t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RigidTransform {
    pub rotation: Matrix3<f64>,
    pub translation: Vector3<f64>,
}

impl Default for RigidTransform {
    /// Camera behind the base looking down `+x`, image right along `-y` and
    /// image down along `-z`.
    fn default() -> Self {
        #[rustfmt::skip]
        let rotation = Matrix3::new(
            0.0,  0.0, 1.0,
            -1.0, 0.0, 0.0,
            0.0, -1.0, 0.0,
        );
        Self {
            rotation,
            translation: Vector3::new(-0.3, 0.0889, 0.0635),
        }
    }
}

impl RigidTransform {
    pub fn identity() -> Self {
        Self {
            rotation: Matrix3::identity(),
            translation: Vector3::zeros(),
        }
    }

    pub fn new(rotation: Matrix3<f64>, translation: Vector3<f64>) -> Result<Self, PerceptionError> {
        let t = Self {
            rotation,
            translation,
        };
        t.validate()?;
        Ok(t)
    }

    pub fn from_rows(rows: [[f64; 3]; 3], translation: [f64; 3]) -> Result<Self, PerceptionError> {
        let r = Matrix3::from_fn(|i, j| rows[i][j]);
        Self::new(r, Vector3::from(translation))
    }

    pub fn rows(&self) -> [[f64; 3]; 3] {
        let r = &self.rotation;
        [
            [r[(0, 0)], r[(0, 1)], r[(0, 2)]],
            [r[(1, 0)], r[(1, 1)], r[(1, 2)]],
            [r[(2, 0)], r[(2, 1)], r[(2, 2)]],
        ]
    }

    pub fn validate(&self) -> Result<(), PerceptionError> {
        if !self.translation.iter().all(|v| v.is_finite()) {
            return Err(PerceptionError::InvalidTransform("non-finite translation".into()));
        }
        let ortho = (self.rotation.transpose() * self.rotation - Matrix3::identity()).amax();
        if !(ortho <= ORTHONORMAL_TOL) {
            return Err(PerceptionError::InvalidTransform(format!(
                "rotation is not orthonormal (max |R^T R - I| = {ortho:e})"
            )));
        }
        let det = self.rotation.determinant();
        if !((det - 1.0).abs() <= ORTHONORMAL_TOL) {
            return Err(PerceptionError::InvalidTransform(format!(
                "rotation determinant is {det}, expected +1"
            )));
        }
        Ok(())
    }

    pub fn apply(&self, p: &CartesianPoint) -> CartesianPoint {
        let v = self.rotation * Vector3::new(p.x, p.y, p.z) + self.translation;
        CartesianPoint::new(v.x, v.y, v.z)
    }

    pub fn inverse(&self) -> Self {
        let rt = self.rotation.transpose();
        Self {
            rotation: rt,
            translation: -(rt * self.translation),
        }
    }
}

/// Arithmetic mean over the valid range samples.
pub fn mean_depth(d: &Detection) -> Result<f64, PerceptionError> {
    let (sum, n) = d
        .range
        .iter()
        .copied()
        .filter(|v| valid_depth(*v))
        .fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    if n == 0 {
        return Err(PerceptionError::NoValidDepth);
    }
    Ok(sum / n as f64)
}

/// Back-project the bounding-box center at the mean depth. Camera frame.
pub fn back_project(d: &Detection, k: &CameraIntrinsics) -> Result<CartesianPoint, PerceptionError> {
    let z = mean_depth(d)?;
    let (u, v) = d.bbox.center();
    Ok(CartesianPoint::new(
        (u - k.cx) * z / k.fx,
        (v - k.cy) * z / k.fy,
        z,
    ))
}

pub fn to_base_frame(
    p_cam: &CartesianPoint,
    t: &RigidTransform,
) -> Result<CartesianPoint, PerceptionError> {
    t.validate()?;
    Ok(t.apply(p_cam))
}

/// Full pipeline: detection -> base-frame target.
pub fn localize(
    d: &Detection,
    k: &CameraIntrinsics,
    t: &RigidTransform,
) -> Result<CartesianPoint, PerceptionError> {
    to_base_frame(&back_project(d, k)?, t)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetectionNoise {
    /// Std-dev of the detected box center, pixels.
    pub pixel_sigma: f64,
    /// Std-dev of each range sample, meters.
    pub depth_sigma: f64,
    /// Number of range samples in the synthetic box.
    pub samples: usize,
    /// Physical radius used to size the synthetic box, meters.
    pub fruit_radius: f64,
}

impl Default for DetectionNoise {
    fn default() -> Self {
        Self {
            pixel_sigma: 0.0,
            depth_sigma: 0.0,
            samples: 25,
            fruit_radius: 0.04,
        }
    }
}

/// Project a base-frame target into the camera and build a detection whose
/// box is centered on the (noisy) projection and whose range samples are the
/// target depth plus Gaussian noise.
pub fn synthesize_detection<R: Rng + ?Sized>(
    target_base: &CartesianPoint,
    t: &RigidTransform,
    k: &CameraIntrinsics,
    noise: &DetectionNoise,
    rng: &mut R,
) -> Result<Detection, PerceptionError> {
    t.validate()?;
    if noise.samples == 0 {
        return Err(PerceptionError::InvalidDetection("samples must be >= 1".into()));
    }
    let p = t.inverse().apply(target_base);
    if !(p.z > 0.0) {
        return Err(PerceptionError::OutOfView(format!(
            "target is behind the camera (depth {:.4} m)",
            p.z
        )));
    }
    let u = k.fx * p.x / p.z + k.cx;
    let v = k.fy * p.y / p.z + k.cy;
    if !k.in_image(u, v) {
        return Err(PerceptionError::OutOfView(format!(
            "projects to pixel ({u:.1}, {v:.1}) outside {}x{}",
            k.width, k.height
        )));
    }
    let (mut uc, mut vc) = (u, v);
    if noise.pixel_sigma > 0.0 {
        let n = Normal::new(0.0, noise.pixel_sigma)
            .map_err(|e| PerceptionError::InvalidDetection(e.to_string()))?;
        uc += n.sample(rng);
        vc += n.sample(rng);
    }
    let half = (k.fx * noise.fruit_radius / p.z).max(1.0);
    let bbox = BoundingBox {
        u_min: uc - half,
        v_min: vc - half,
        u_max: uc + half,
        v_max: vc + half,
    };
    let range = if noise.depth_sigma > 0.0 {
        let n = Normal::new(p.z, noise.depth_sigma)
            .map_err(|e| PerceptionError::InvalidDetection(e.to_string()))?;
        (0..noise.samples).map(|_| n.sample(rng)).collect()
    } else {
        vec![p.z; noise.samples]
    };
    Detection::new(bbox, range)
}
