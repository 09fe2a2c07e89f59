//! Single-trial execution: the harvest-cycle state machine and the
//! lower-level tracking runs it is built from.

use super::plant::{step_with, Actuators, Commands, Phase, SimState};
use super::{ControllerKind, SimConfig, SimError};
use crate::control::{
    lyapunov_sample, open_loop_velocity_controller, pi_prismatic_controller,
    position_mode_controller, tracking_error, velocity_controller, ControlError,
    PrismaticState, VelocityCommand,
};
use crate::kinematics::{forward_kinematics, inverse_kinematics, CartesianPoint, JointState};
use crate::perception::{localize, synthesize_detection, DetectionNoise};
use crate::trajectory::{plan_cartesian_reference, CartesianReference};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// One logged control step. Angles in radians, rates in rad/s.
///
/// `omega_phi`/`omega_theta` are the joint rates actually applied (after
/// gain bias and saturation); `u_prismatic` is the PI command.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogRow {
    pub t: f64,
    pub phi: f64,
    pub theta: f64,
    pub d: f64,
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub y_r: f64,
    pub z_r: f64,
    pub e_y: f64,
    pub e_z: f64,
    pub v: f64,
    pub omega_phi: f64,
    pub omega_theta: f64,
    pub u_prismatic: f64,
    pub phase: Phase,
}

impl LogRow {
    pub const CSV_HEADER: &'static str =
        "t,phi,theta,D,x,y,z,y_r,z_r,e_y,e_z,V,omega_phi,omega_theta,u_prismatic";
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct PhaseDurations {
    pub localize: f64,
    pub approach: f64,
    pub detach: f64,
    #[serde(rename = "return")]
    pub return_home: f64,
}

impl PhaseDurations {
    pub fn total(&self) -> f64 {
        self.localize + self.approach + self.detach + self.return_home
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FailureKind {
    Unreachable,
    Perception,
    LimitBreach,
    Control,
    Config,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialFailure {
    pub phase: Phase,
    pub kind: FailureKind,
    pub message: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhaseEvent {
    pub phase: Phase,
    pub t: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub target: CartesianPoint,
    pub perceived_target: Option<CartesianPoint>,
    pub controller: ControllerKind,
    pub seed: u64,
    /// Distance from the end effector to the true target when the approach
    /// ends (or when the trial fails, if earlier), m.
    pub final_error: f64,
    /// Approach completed and `final_error` under the threshold.
    pub success: bool,
    pub threshold: f64,
    pub phase_durations: PhaseDurations,
    pub phases: Vec<PhaseEvent>,
    pub failure: Option<TrialFailure>,
    #[serde(skip)]
    pub log: Vec<LogRow>,
}

impl TrialRecord {
    pub fn final_phase(&self) -> Phase {
        self.phases.last().map(|e| e.phase).unwrap_or(Phase::Idle)
    }

    /// True when consecutive logged phases only use legal edges.
    pub fn transitions_valid(&self) -> bool {
        let mut prev = Phase::Idle;
        for e in &self.phases {
            if e.phase == prev {
                continue;
            }
            if !prev.can_transition_to(e.phase) {
                return false;
            }
            prev = e.phase;
        }
        true
    }
}

/// One controlled stretch of the cycle.
struct Segment {
    phase: Phase,
    reference: CartesianReference,
    /// Joint-space endpoints for the position-mode servo.
    joint_start: JointState,
    joint_goal: JointState,
    d_goal: f64,
    duration: f64,
    /// Keep regulating after `duration` until the measured end effector is
    /// within tolerance of this point, or the settle window runs out.
    settle_goal: Option<CartesianPoint>,
}

fn hold_segment(phase: Phase, at: &CartesianPoint, q: &JointState, duration: f64) -> Segment {
    Segment {
        phase,
        reference: plan_cartesian_reference(at, at, 1.0).expect("positive horizon"),
        joint_start: *q,
        joint_goal: *q,
        d_goal: q.d_prismatic,
        duration,
        settle_goal: None,
    }
}

fn revolute_command(
    kind: ControllerKind,
    cfg: &SimConfig,
    act: &Actuators,
    seg: &Segment,
    t_local: f64,
    q_meas: &JointState,
) -> Result<VelocityCommand, ControlError> {
    let (ry, rz) = seg.reference.eval(t_local);
    match kind {
        ControllerKind::Proposed => {
            let err = tracking_error(&forward_kinematics(q_meas, &cfg.links), &ry, &rz);
            velocity_controller(q_meas, &err, &ry, &rz, &cfg.gains, &cfg.links)
        }
        ControllerKind::OpenLoop => {
            open_loop_velocity_controller(q_meas, &ry, &rz, &cfg.links, cfg.gains.singularity_guard)
        }
        ControllerKind::PositionMode => {
            let sp = position_mode_controller(
                &seg.joint_goal,
                t_local,
                seg.reference.t_f(),
                &seg.joint_start,
            )?;
            let k = act.model.servo_gain;
            Ok(VelocityCommand {
                omega_phi: sp.velocity.phi
                    + k * (sp.position.phi + act.servo_offset_phi - q_meas.phi),
                omega_theta: sp.velocity.theta
                    + k * (sp.position.theta + act.servo_offset_theta - q_meas.theta),
            })
        }
    }
}

struct Runner<'a> {
    cfg: &'a SimConfig,
    act: &'a Actuators,
    kind: ControllerKind,
    log: Vec<LogRow>,
    decimation: usize,
}

impl Runner<'_> {
    /// Run a segment. On failure the state reached so far comes back with
    /// the error.
    fn run(
        &mut self,
        mut state: SimState,
        seg: &Segment,
    ) -> Result<(SimState, f64), (SimState, SimError)> {
        let (cfg, act, kind) = (self.cfg, self.act, self.kind);
        let dt = cfg.settings.dt;
        let n_min = (seg.duration / dt).round() as u64;
        let n_settle = (cfg.settings.settle_max / dt).round() as u64;
        let t0 = state.t;
        state.phase = seg.phase;
        let mut k: u64 = 0;
        loop {
            if k >= n_min {
                match &seg.settle_goal {
                    None => break,
                    Some(goal) => {
                        let seen = forward_kinematics(&state.q_measured, &cfg.links);
                        if k >= n_min + n_settle
                            || seen.distance(goal) < cfg.settings.settle_tolerance
                        {
                            break;
                        }
                    }
                }
            }
            let (u, integral) = pi_prismatic_controller(
                &PrismaticState {
                    d: state.q.d_prismatic,
                    integral: state.pi_integral,
                },
                seg.d_goal,
                dt,
                &cfg.gains,
            );
            let result = step_with(&state, &act.model, &cfg.limits, dt, |t, q_meas| {
                let velocity = revolute_command(kind, cfg, act, seg, t - t0, q_meas)?;
                Ok(Commands {
                    velocity,
                    prismatic: u,
                })
            });
            let (mut next, applied) = match result {
                Ok(v) => v,
                Err(e) => return Err((state, e)),
            };
            if self.decimation > 0 && k.is_multiple_of(self.decimation as u64) {
                let p = forward_kinematics(&state.q, &cfg.links);
                let (ry, rz) = seg.reference.eval(k as f64 * dt);
                let err = tracking_error(&p, &ry, &rz);
                self.log.push(LogRow {
                    t: state.t,
                    phi: state.q.phi,
                    theta: state.q.theta,
                    d: state.q.d_prismatic,
                    x: p.x,
                    y: p.y,
                    z: p.z,
                    y_r: ry.position,
                    z_r: rz.position,
                    e_y: err.e_y,
                    e_z: err.e_z,
                    v: lyapunov_sample(&err, &cfg.gains).v,
                    omega_phi: applied.phi_dot,
                    omega_theta: applied.theta_dot,
                    u_prismatic: u,
                    phase: seg.phase,
                });
            }
            next.pi_integral = integral;
            state = next;
            k += 1;
        }
        Ok((state, k as f64 * dt))
    }
}

fn failure_of(phase: Phase, e: &SimError) -> TrialFailure {
    let kind = match e {
        SimError::LimitBreach(_) => FailureKind::LimitBreach,
        SimError::Control(_) => FailureKind::Control,
        SimError::Perception(_) => FailureKind::Perception,
        SimError::Kinematics(_) => FailureKind::Unreachable,
        SimError::InvalidConfig(_) => FailureKind::Config,
    };
    TrialFailure {
        phase,
        kind,
        message: e.to_string(),
    }
}

/// Run one complete picking cycle against `target_true`.
///
/// Localize (perception, arm holds home) → Approach (quintic tracking plus
/// settling) → Detach (hold) → Return (quintic back home) → Done. Any error
/// moves the trial to `Failed`. Only configuration errors are returned as
/// `Err`.
pub fn run_harvest_cycle(
    target_true: &CartesianPoint,
    kind: ControllerKind,
    cfg: &SimConfig,
    seed: u64,
) -> Result<TrialRecord, SimError> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let act = cfg.plant.realize(&mut rng);
    let home = cfg.settings.home;
    let home_p = forward_kinematics(&home, &cfg.links);
    let mut state = SimState::at_rest(home, &act.model);
    let mut runner = Runner {
        cfg,
        act: &act,
        kind,
        log: Vec::new(),
        decimation: cfg.settings.log_decimation,
    };
    let mut rec = TrialRecord {
        target: *target_true,
        perceived_target: None,
        controller: kind,
        seed,
        final_error: home_p.distance(target_true),
        success: false,
        threshold: cfg.settings.success_threshold,
        phase_durations: PhaseDurations::default(),
        phases: vec![PhaseEvent {
            phase: Phase::Idle,
            t: 0.0,
        }],
        failure: None,
        log: Vec::new(),
    };

    macro_rules! fail {
        ($state:expr, $phase:expr, $err:expr) => {{
            let st: SimState = $state;
            let err: SimError = $err;
            if matches!($phase, Phase::Localize | Phase::Approach) {
                rec.final_error = forward_kinematics(&st.q, &cfg.links).distance(target_true);
            }
            rec.failure = Some(failure_of($phase, &err));
            rec.phases.push(PhaseEvent {
                phase: Phase::Failed,
                t: st.t,
            });
            rec.success = false;
            rec.log = runner.log;
            return Ok(rec);
        }};
    }

    // Localize
    rec.phases.push(PhaseEvent {
        phase: Phase::Localize,
        t: state.t,
    });
    let perceived = if cfg.settings.use_perception {
        let noise = DetectionNoise {
            pixel_sigma: act.model.pixel_noise_sigma,
            depth_sigma: act.model.depth_noise_sigma,
            samples: cfg.settings.range_samples,
            fruit_radius: cfg.settings.fruit_radius,
        };
        synthesize_detection(target_true, &cfg.extrinsics, &cfg.intrinsics, &noise, &mut rng)
            .and_then(|d| localize(&d, &cfg.intrinsics, &cfg.extrinsics))
            .map_err(SimError::from)
    } else {
        Ok(*target_true)
    };
    let hold = hold_segment(Phase::Localize, &home_p, &home, cfg.budget.localize);
    state = match runner.run(state, &hold) {
        Ok((s, dur)) => {
            rec.phase_durations.localize = dur;
            s
        }
        Err((s, e)) => fail!(s, Phase::Localize, e),
    };
    let perceived = match perceived {
        Ok(p) => p,
        Err(e) => fail!(state, Phase::Localize, e),
    };
    rec.perceived_target = Some(perceived);
    let q_goal = match inverse_kinematics(&perceived, &cfg.links, &cfg.limits) {
        Ok(q) => q,
        Err(e) => fail!(state, Phase::Localize, e.into()),
    };

    // Approach
    rec.phases.push(PhaseEvent {
        phase: Phase::Approach,
        t: state.t,
    });
    let start_p = forward_kinematics(&state.q_measured, &cfg.links);
    let reference = match plan_cartesian_reference(&start_p, &perceived, cfg.budget.approach) {
        Ok(r) => r,
        Err(e) => fail!(state, Phase::Approach, SimError::Control(e.into())),
    };
    let approach = Segment {
        phase: Phase::Approach,
        reference,
        joint_start: state.q_measured,
        joint_goal: q_goal,
        d_goal: q_goal.d_prismatic,
        duration: cfg.budget.approach,
        settle_goal: Some(perceived),
    };
    state = match runner.run(state, &approach) {
        Ok((s, dur)) => {
            rec.phase_durations.approach = dur;
            s
        }
        Err((s, e)) => fail!(s, Phase::Approach, e),
    };
    rec.final_error = forward_kinematics(&state.q, &cfg.links).distance(target_true);
    rec.success = rec.final_error < rec.threshold;

    // Detach
    rec.phases.push(PhaseEvent {
        phase: Phase::Detach,
        t: state.t,
    });
    let goal_ref = CartesianPoint::new(perceived.x, reference.y.goal, reference.z.goal);
    let detach = hold_segment(Phase::Detach, &goal_ref, &q_goal, cfg.budget.detach);
    state = match runner.run(state, &detach) {
        Ok((s, dur)) => {
            rec.phase_durations.detach = dur;
            s
        }
        Err((s, e)) => fail!(s, Phase::Detach, e),
    };

    // Return
    rec.phases.push(PhaseEvent {
        phase: Phase::Return,
        t: state.t,
    });
    let back = match plan_cartesian_reference(&goal_ref, &home_p, cfg.budget.approach) {
        Ok(r) => r,
        Err(e) => fail!(state, Phase::Return, SimError::Control(e.into())),
    };
    let ret = Segment {
        phase: Phase::Return,
        reference: back,
        joint_start: q_goal,
        joint_goal: home,
        d_goal: home.d_prismatic,
        duration: cfg.budget.approach,
        settle_goal: Some(home_p),
    };
    state = match runner.run(state, &ret) {
        Ok((s, dur)) => {
            rec.phase_durations.return_home = dur;
            s
        }
        Err((s, e)) => fail!(s, Phase::Return, e),
    };
    rec.phases.push(PhaseEvent {
        phase: Phase::Done,
        t: state.t,
    });
    rec.log = runner.log;
    Ok(rec)
}

/// Outcome of a single home-to-target move (no perception, no detach).
#[derive(Debug, Clone, PartialEq)]
pub struct MotionResult {
    pub final_error: f64,
    pub final_state: SimState,
    pub duration: f64,
    pub log: Vec<LogRow>,
}

/// Move from home to a given target with `kind`, using the configured
/// approach horizon and settling rule. Used for controller comparisons.
pub fn run_motion_test(
    target: &CartesianPoint,
    kind: ControllerKind,
    cfg: &SimConfig,
    seed: u64,
) -> Result<MotionResult, SimError> {
    cfg.validate()?;
    let q_goal = inverse_kinematics(target, &cfg.links, &cfg.limits)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let act = cfg.plant.realize(&mut rng);
    let state = SimState::at_rest(cfg.settings.home, &act.model);
    let start_p = forward_kinematics(&state.q_measured, &cfg.links);
    let seg = Segment {
        phase: Phase::Approach,
        reference: plan_cartesian_reference(&start_p, target, cfg.budget.approach)
            .map_err(ControlError::from)?,
        joint_start: state.q_measured,
        joint_goal: q_goal,
        d_goal: q_goal.d_prismatic,
        duration: cfg.budget.approach,
        settle_goal: Some(*target),
    };
    let mut runner = Runner {
        cfg,
        act: &act,
        kind,
        log: Vec::new(),
        decimation: cfg.settings.log_decimation,
    };
    let (state, duration) = runner.run(state, &seg).map_err(|(_, e)| e)?;
    Ok(MotionResult {
        final_error: forward_kinematics(&state.q, &cfg.links).distance(target),
        final_state: state,
        duration,
        log: runner.log,
    })
}

/// Track `reference` from rest at `q0` for `duration` seconds with a fixed
/// actuator realization, logging every step. The prismatic joint holds
/// `q0.d_prismatic`.
pub fn run_tracking(
    q0: &JointState,
    reference: &CartesianReference,
    kind: ControllerKind,
    act: &Actuators,
    cfg: &SimConfig,
    duration: f64,
) -> Result<Vec<LogRow>, SimError> {
    cfg.validate()?;
    let end = CartesianPoint::new(
        forward_kinematics(q0, &cfg.links).x,
        reference.y.goal,
        reference.z.goal,
    );
    let joint_goal = crate::kinematics::inverse_kinematics_unchecked(&end, &cfg.links)
        .map(|q| JointState::new(q.phi, q.theta, q0.d_prismatic))
        .unwrap_or(*q0);
    let seg = Segment {
        phase: Phase::Approach,
        reference: *reference,
        joint_start: *q0,
        joint_goal,
        d_goal: q0.d_prismatic,
        duration,
        settle_goal: None,
    };
    let mut runner = Runner {
        cfg,
        act,
        kind,
        log: Vec::new(),
        decimation: 1,
    };
    let state = SimState::at_rest(*q0, &act.model);
    runner.run(state, &seg).map_err(|(_, e)| e)?;
    Ok(runner.log)
}
