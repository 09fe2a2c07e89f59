use harvest_core::control::*;
use harvest_core::kinematics::{velocity_map, JointState, LinkParams};
use harvest_core::simulation::{run_tracking, Actuators, ControllerKind, PlantModel, SimConfig};
use harvest_core::kinematics::{forward_kinematics, CartesianPoint};
use harvest_core::trajectory::{plan_cartesian_reference, ReferenceSample};
use proptest::prelude::*;

fn rs(position: f64, velocity: f64) -> ReferenceSample {
    ReferenceSample {
        t: 0.0,
        position,
        velocity,
        acceleration: 0.0,
    }
}

fn joint() -> impl Strategy<Value = JointState> {
    let r = 25f64.to_radians();
    (-r..r, -r..r, 0.0f64..0.61).prop_map(|(p, t, d)| JointState::new(p, t, d))
}

proptest! {
    /// Through the velocity map the law produces exactly the error dynamics
    /// ẏ - ẏ_r = -k1·e_y and ż - ż_r = -k2·e_z.
    #[test]
    fn closed_loop_error_dynamics(
        q in joint(),
        ey in -0.1f64..0.1, ez in -0.1f64..0.1,
        vy in -0.3f64..0.3, vz in -0.3f64..0.3,
        k1 in 0.5f64..20.0, k2 in 0.5f64..20.0,
    ) {
        let gains = ControllerGains::new(k1, k2).unwrap();
        let links = LinkParams::default();
        let err = TrackingError { e_y: ey, e_z: ez };
        let cmd = velocity_controller(&q, &err, &rs(0.0, vy), &rs(0.0, vz), &gains, &links).unwrap();
        let (yd, zd) = velocity_map(&q, cmd.omega_phi, cmd.omega_theta, &links);
        prop_assert!((yd - vy + k1 * ey).abs() < 1e-12);
        prop_assert!((zd - vz + k2 * ez).abs() < 1e-12);
    }

    #[test]
    fn open_loop_reproduces_reference_velocity(q in joint(), vy in -0.3f64..0.3, vz in -0.3f64..0.3) {
        let links = LinkParams::default();
        let g = ControllerGains::default();
        let cmd = open_loop_velocity_controller(&q, &rs(0.0, vy), &rs(0.0, vz), &links, g.singularity_guard).unwrap();
        let (yd, zd) = velocity_map(&q, cmd.omega_phi, cmd.omega_theta, &links);
        prop_assert!((yd - vy).abs() < 1e-12);
        prop_assert!((zd - vz).abs() < 1e-12);
    }

    #[test]
    fn lyapunov_derivative_is_negative(ey in -0.1f64..0.1, ez in -0.1f64..0.1) {
        let g = ControllerGains::default();
        let s = lyapunov_sample(&TrackingError { e_y: ey, e_z: ez }, &g);
        prop_assert!(s.v >= 0.0);
        prop_assert!(s.vdot_analytic <= 0.0);
        if ey != 0.0 || ez != 0.0 {
            prop_assert!(s.vdot_analytic < 0.0);
        }
    }

    #[test]
    fn pi_output_respects_bounds(d in 0.0f64..0.61, goal in 0.0f64..0.61, integral in -14.0f64..14.0) {
        let g = ControllerGains::default();
        let (_, i) = pi_prismatic_controller(&PrismaticState { d, integral }, goal, 1e-3, &g);
        prop_assert!(g.ki_prismatic * i.abs() <= g.prismatic_output_limit + 1e-12);
    }
}

/// Finite differences of the logged V agree with the analytic derivative
/// along an ideal-plant run.
#[test]
fn logged_v_matches_analytic_derivative() {
    let cfg = SimConfig::default().with_plant(PlantModel::ideal());
    let act = Actuators::nominal(&cfg.plant);
    let q0 = JointState::from_degrees(5.0, -3.0, 0.1);
    let p0 = forward_kinematics(&q0, &cfg.links);
    let goal = CartesianPoint::new(p0.x, p0.y + 0.1, p0.z - 0.08);
    let start = CartesianPoint::new(p0.x, p0.y + 0.02, p0.z - 0.015);
    let r = plan_cartesian_reference(&start, &goal, 2.0).unwrap();
    let log = run_tracking(&q0, &r, ControllerKind::Proposed, &act, &cfg, 1.0).unwrap();
    let dt = cfg.settings.dt;
    for w in log.windows(2) {
        let vdot = |row: &harvest_core::simulation::LogRow| {
            lyapunov_sample(&TrackingError { e_y: row.e_y, e_z: row.e_z }, &cfg.gains).vdot_analytic
        };
        let fd = (w[1].v - w[0].v) / dt;
        let trap = 0.5 * (vdot(&w[0]) + vdot(&w[1]));
        // trapezoid rule on V = V0·exp(-2kt): relative error (2k·dt)²/12
        let k = cfg.gains.k1.max(cfg.gains.k2);
        let tol = 1.5 * (2.0 * k * dt).powi(2) / 12.0;
        assert!((fd - trap).abs() <= tol * trap.abs() + 1e-15, "{fd} vs {trap}");
    }
}

#[test]
fn singularity_guard_trips() {
    let g = ControllerGains {
        singularity_guard: 20f64.to_radians(),
        ..ControllerGains::default()
    };
    let q = JointState::from_degrees(22.0, 0.0, 0.0);
    let e = TrackingError::default();
    let r = velocity_controller(&q, &e, &rs(0.0, 0.0), &rs(0.0, 0.0), &g, &LinkParams::default());
    assert!(matches!(r, Err(ControlError::SingularityGuard { .. })));
}
