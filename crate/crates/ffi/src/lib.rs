//! C ABI over `harvest-core`.
//!
//! Fallible functions return an [`HvStatus`]; on failure a message for the
//! calling thread is available from [`hv_last_error_message`]. Handles are
//! opaque and must be released with their matching `_free` function.

use harvest_core::control::{velocity_controller, ControllerGains, TrackingError};
use harvest_core::kinematics::{
    forward_kinematics, inverse_kinematics, velocity_map, CartesianPoint, JointState,
    KinematicsError,
};
use harvest_core::perception::{localize, BoundingBox, Detection};
use harvest_core::simulation::{
    run_harvest_cycle, ControllerKind, PlantModel, PlantPreset, SimConfig, SimError,
};
use harvest_core::trajectory::{eval_quintic, plan_quintic, QuinticAxis};
use std::cell::RefCell;
use std::ffi::{c_char, c_int};
use std::panic::{catch_unwind, AssertUnwindSafe};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HvStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    OutOfReach = 3,
    LimitViolation = 4,
    Singularity = 5,
    PerceptionFailed = 6,
    SimulationFailed = 7,
    Panic = 8,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HvController {
    Proposed = 0,
    OpenLoop = 1,
    PositionMode = 2,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HvPlant {
    Ideal = 0,
    Nominal = 1,
    Perturbed = 2,
}

/// Joint values: radians, radians, meters.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct HvJoint {
    pub phi: f64,
    pub theta: f64,
    pub d: f64,
}

/// Base-frame point, meters.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct HvPoint {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct HvSample {
    pub position: f64,
    pub velocity: f64,
    pub acceleration: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct HvTrialResult {
    /// Distance to the target at the end of the approach, meters.
    pub final_error: f64,
    /// 1 when the approach finished under the success threshold.
    pub success: c_int,
    /// 1 when the whole cycle reached the home pose again.
    pub completed: c_int,
    /// Sum of the phase durations, seconds.
    pub cycle_time: f64,
}

/// Opaque simulation configuration.
pub struct HvConfig {
    inner: SimConfig,
}

/// Opaque single-axis quintic.
pub struct HvQuintic {
    inner: QuinticAxis,
}

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_error(msg: impl Into<String>) {
    LAST_ERROR.with(|e| *e.borrow_mut() = msg.into());
}

fn fail(status: HvStatus, msg: impl Into<String>) -> HvStatus {
    set_error(msg);
    status
}

fn guard(f: impl FnOnce() -> HvStatus) -> HvStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(s) => s,
        Err(_) => fail(HvStatus::Panic, "internal panic"),
    }
}

fn kin_status(e: &KinematicsError) -> HvStatus {
    match e {
        KinematicsError::OutOfReach(_) => HvStatus::OutOfReach,
        KinematicsError::LimitViolation(_) => HvStatus::LimitViolation,
        _ => HvStatus::InvalidArgument,
    }
}

fn sim_status(e: &SimError) -> HvStatus {
    match e {
        SimError::InvalidConfig(_) => HvStatus::InvalidArgument,
        SimError::Kinematics(k) => kin_status(k),
        SimError::Perception(_) => HvStatus::PerceptionFailed,
        _ => HvStatus::SimulationFailed,
    }
}

fn config_ref<'a>(cfg: *const HvConfig) -> SimConfigRef<'a> {
    if cfg.is_null() {
        SimConfigRef::Default(Box::default())
    } else {
        // SAFETY: non-null handles come from hv_config_new and are live per
        // the API contract.
        SimConfigRef::Borrowed(unsafe { &(*cfg).inner })
    }
}

enum SimConfigRef<'a> {
    Default(Box<SimConfig>),
    Borrowed(&'a SimConfig),
}

impl std::ops::Deref for SimConfigRef<'_> {
    type Target = SimConfig;
    fn deref(&self) -> &SimConfig {
        match self {
            SimConfigRef::Default(b) => b,
            SimConfigRef::Borrowed(r) => r,
        }
    }
}

fn joint(q: HvJoint) -> JointState {
    JointState::new(q.phi, q.theta, q.d)
}

fn point(p: HvPoint) -> CartesianPoint {
    CartesianPoint::new(p.x, p.y, p.z)
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn hv_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Copy the calling thread's last error message into `buf` (always
/// NUL-terminated when `len > 0`). Returns the full message length in bytes,
/// excluding the terminator.
///
/// # Safety
/// `buf` must be null or point to at least `len` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn hv_last_error_message(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        let bytes = msg.as_bytes();
        if !buf.is_null() && len > 0 {
            let n = bytes.len().min(len - 1);
            std::ptr::copy_nonoverlapping(bytes.as_ptr(), buf.cast::<u8>(), n);
            *buf.add(n) = 0;
        }
        bytes.len()
    })
}

/// New configuration with library defaults and the given plant preset.
#[no_mangle]
pub extern "C" fn hv_config_new(plant: HvPlant) -> *mut HvConfig {
    let preset = match plant {
        HvPlant::Ideal => PlantPreset::Ideal,
        HvPlant::Nominal => PlantPreset::Nominal,
        HvPlant::Perturbed => PlantPreset::Perturbed,
    };
    let inner = SimConfig::default().with_plant(PlantModel::preset(preset));
    Box::into_raw(Box::new(HvConfig { inner }))
}

/// # Safety
/// `cfg` must be null or a handle from [`hv_config_new`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn hv_config_free(cfg: *mut HvConfig) {
    if !cfg.is_null() {
        drop(Box::from_raw(cfg));
    }
}

/// Set the Cartesian error gains `k1`, `k2` (1/s).
///
/// # Safety
/// `cfg` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn hv_config_set_gains(cfg: *mut HvConfig, k1: f64, k2: f64) -> HvStatus {
    guard(|| {
        if cfg.is_null() {
            return fail(HvStatus::NullPointer, "cfg is null");
        }
        let gains = ControllerGains {
            k1,
            k2,
            ..(*cfg).inner.gains
        };
        if let Err(e) = gains.validate() {
            return fail(HvStatus::InvalidArgument, e.to_string());
        }
        (*cfg).inner.gains = gains;
        HvStatus::Ok
    })
}

/// Set the link lengths `d1`, `d2`, `d3` (m).
///
/// # Safety
/// `cfg` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn hv_config_set_links(
    cfg: *mut HvConfig,
    d1: f64,
    d2: f64,
    d3: f64,
) -> HvStatus {
    guard(|| {
        if cfg.is_null() {
            return fail(HvStatus::NullPointer, "cfg is null");
        }
        match harvest_core::kinematics::LinkParams::new(d1, d2, d3) {
            Ok(l) => {
                (*cfg).inner.links = l;
                HvStatus::Ok
            }
            Err(e) => fail(HvStatus::InvalidArgument, e.to_string()),
        }
    })
}

/// Forward kinematics. A null `cfg` uses the defaults.
///
/// # Safety
/// `cfg` must be null or live; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn hv_forward_kinematics(
    cfg: *const HvConfig,
    q: HvJoint,
    out: *mut HvPoint,
) -> HvStatus {
    guard(|| {
        if out.is_null() {
            return fail(HvStatus::NullPointer, "out is null");
        }
        let c = config_ref(cfg);
        let p = forward_kinematics(&joint(q), &c.links);
        *out = HvPoint {
            x: p.x,
            y: p.y,
            z: p.z,
        };
        HvStatus::Ok
    })
}

/// Inverse kinematics with limit checking. A null `cfg` uses the defaults.
///
/// # Safety
/// `cfg` must be null or live; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn hv_inverse_kinematics(
    cfg: *const HvConfig,
    p: HvPoint,
    out: *mut HvJoint,
) -> HvStatus {
    guard(|| {
        if out.is_null() {
            return fail(HvStatus::NullPointer, "out is null");
        }
        let c = config_ref(cfg);
        match inverse_kinematics(&point(p), &c.links, &c.limits) {
            Ok(q) => {
                *out = HvJoint {
                    phi: q.phi,
                    theta: q.theta,
                    d: q.d_prismatic,
                };
                HvStatus::Ok
            }
            Err(e) => fail(kin_status(&e), e.to_string()),
        }
    })
}

/// End-effector `(ydot, zdot)` for revolute rates `(omega_phi, omega_theta)`.
///
/// # Safety
/// `cfg` must be null or live; `ydot` and `zdot` must be writable.
#[no_mangle]
pub unsafe extern "C" fn hv_velocity_map(
    cfg: *const HvConfig,
    q: HvJoint,
    omega_phi: f64,
    omega_theta: f64,
    ydot: *mut f64,
    zdot: *mut f64,
) -> HvStatus {
    guard(|| {
        if ydot.is_null() || zdot.is_null() {
            return fail(HvStatus::NullPointer, "output pointer is null");
        }
        let c = config_ref(cfg);
        let (a, b) = velocity_map(&joint(q), omega_phi, omega_theta, &c.links);
        *ydot = a;
        *zdot = b;
        HvStatus::Ok
    })
}

/// Closed-loop revolute command for tracking error `(e_y, e_z)` and reference
/// velocities `(ydot_r, zdot_r)`.
///
/// # Safety
/// `cfg` must be null or live; `omega_phi` and `omega_theta` must be writable.
#[no_mangle]
pub unsafe extern "C" fn hv_velocity_command(
    cfg: *const HvConfig,
    q: HvJoint,
    e_y: f64,
    e_z: f64,
    ydot_r: f64,
    zdot_r: f64,
    omega_phi: *mut f64,
    omega_theta: *mut f64,
) -> HvStatus {
    guard(|| {
        if omega_phi.is_null() || omega_theta.is_null() {
            return fail(HvStatus::NullPointer, "output pointer is null");
        }
        let c = config_ref(cfg);
        let ry = harvest_core::trajectory::ReferenceSample {
            t: 0.0,
            position: 0.0,
            velocity: ydot_r,
            acceleration: 0.0,
        };
        let rz = harvest_core::trajectory::ReferenceSample {
            velocity: zdot_r,
            ..ry
        };
        let err = TrackingError { e_y, e_z };
        match velocity_controller(&joint(q), &err, &ry, &rz, &c.gains, &c.links) {
            Ok(cmd) => {
                *omega_phi = cmd.omega_phi;
                *omega_theta = cmd.omega_theta;
                HvStatus::Ok
            }
            Err(e) => fail(HvStatus::Singularity, e.to_string()),
        }
    })
}

/// Localize a detection (pixel box plus `n` range samples in meters) into
/// the base frame using the configured camera.
///
/// # Safety
/// `cfg` must be null or live; `range` must point to `n` doubles; `out` must
/// be writable.
#[no_mangle]
pub unsafe extern "C" fn hv_localize(
    cfg: *const HvConfig,
    u_min: f64,
    v_min: f64,
    u_max: f64,
    v_max: f64,
    range: *const f64,
    n: usize,
    out: *mut HvPoint,
) -> HvStatus {
    guard(|| {
        if out.is_null() || (range.is_null() && n > 0) {
            return fail(HvStatus::NullPointer, "null pointer argument");
        }
        let samples = if n == 0 {
            Vec::new()
        } else {
            std::slice::from_raw_parts(range, n).to_vec()
        };
        let c = config_ref(cfg);
        let bbox = BoundingBox {
            u_min,
            v_min,
            u_max,
            v_max,
        };
        let det = match Detection::new(bbox, samples) {
            Ok(d) => d,
            Err(e) => return fail(HvStatus::InvalidArgument, e.to_string()),
        };
        match localize(&det, &c.intrinsics, &c.extrinsics) {
            Ok(p) => {
                *out = HvPoint {
                    x: p.x,
                    y: p.y,
                    z: p.z,
                };
                HvStatus::Ok
            }
            Err(e) => fail(HvStatus::PerceptionFailed, e.to_string()),
        }
    })
}

/// Plan a rest-to-rest quintic from `p0` to `pf` over `t_f` seconds.
///
/// # Safety
/// `out` must be writable; the handle it receives is freed with
/// [`hv_quintic_free`].
#[no_mangle]
pub unsafe extern "C" fn hv_quintic_new(
    p0: f64,
    pf: f64,
    t_f: f64,
    out: *mut *mut HvQuintic,
) -> HvStatus {
    guard(|| {
        if out.is_null() {
            return fail(HvStatus::NullPointer, "out is null");
        }
        match plan_quintic(p0, pf, t_f) {
            Ok(inner) => {
                *out = Box::into_raw(Box::new(HvQuintic { inner }));
                HvStatus::Ok
            }
            Err(e) => fail(HvStatus::InvalidArgument, e.to_string()),
        }
    })
}

/// Evaluate a quintic at `t` (clamped to `[0, t_f]`).
///
/// # Safety
/// `q` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn hv_quintic_eval(
    q: *const HvQuintic,
    t: f64,
    out: *mut HvSample,
) -> HvStatus {
    guard(|| {
        if q.is_null() || out.is_null() {
            return fail(HvStatus::NullPointer, "null pointer argument");
        }
        let s = eval_quintic(&(*q).inner, t);
        *out = HvSample {
            position: s.position,
            velocity: s.velocity,
            acceleration: s.acceleration,
        };
        HvStatus::Ok
    })
}

/// Write the six polynomial coefficients `a0..a5` into `coeffs`.
///
/// # Safety
/// `q` must be live; `coeffs` must point to 6 writable doubles.
#[no_mangle]
pub unsafe extern "C" fn hv_quintic_coefficients(
    q: *const HvQuintic,
    coeffs: *mut f64,
) -> HvStatus {
    guard(|| {
        if q.is_null() || coeffs.is_null() {
            return fail(HvStatus::NullPointer, "null pointer argument");
        }
        std::ptr::copy_nonoverlapping((*q).inner.coeffs.as_ptr(), coeffs, 6);
        HvStatus::Ok
    })
}

/// # Safety
/// `q` must be null or a handle from [`hv_quintic_new`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn hv_quintic_free(q: *mut HvQuintic) {
    if !q.is_null() {
        drop(Box::from_raw(q));
    }
}

/// Run one full picking cycle against `target`.
///
/// A cycle that fails part-way still fills `out` and returns `HV_STATUS_OK`
/// with `completed = 0`; only invalid arguments produce an error status.
///
/// # Safety
/// `cfg` must be null or live; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn hv_run_harvest_cycle(
    cfg: *const HvConfig,
    target: HvPoint,
    controller: HvController,
    seed: u64,
    out: *mut HvTrialResult,
) -> HvStatus {
    guard(|| {
        if out.is_null() {
            return fail(HvStatus::NullPointer, "out is null");
        }
        let kind = match controller {
            HvController::Proposed => ControllerKind::Proposed,
            HvController::OpenLoop => ControllerKind::OpenLoop,
            HvController::PositionMode => ControllerKind::PositionMode,
        };
        let mut c = (*config_ref(cfg)).clone();
        c.settings.log_decimation = 0;
        match run_harvest_cycle(&point(target), kind, &c, seed) {
            Ok(rec) => {
                *out = HvTrialResult {
                    final_error: rec.final_error,
                    success: rec.success as c_int,
                    completed: rec.failure.is_none() as c_int,
                    cycle_time: rec.phase_durations.total(),
                };
                if let Some(f) = &rec.failure {
                    set_error(f.message.clone());
                }
                HvStatus::Ok
            }
            Err(e) => fail(sim_status(&e), e.to_string()),
        }
    })
}
