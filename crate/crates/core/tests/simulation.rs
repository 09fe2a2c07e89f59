use harvest_core::kinematics::{forward_kinematics, CartesianPoint, JointLimits, JointState};
use harvest_core::simulation::*;

fn ideal() -> SimConfig {
    SimConfig::default().with_plant(PlantModel::ideal())
}

fn targets(n: usize, seed: u64) -> Vec<CartesianPoint> {
    SceneConfig::default().targets(&ideal(), n, seed)
}

#[test]
fn null_approach_is_exact() {
    let cfg = ideal();
    let home = forward_kinematics(&cfg.settings.home, &cfg.links);
    for kind in ControllerKind::ALL {
        let rec = run_harvest_cycle(&home, kind, &cfg, 1).unwrap();
        assert!(rec.success, "{kind}");
        assert!(rec.final_error < 1e-6, "{kind}: {}", rec.final_error);
        assert_eq!(rec.final_phase(), Phase::Done);
    }
}

#[test]
fn ideal_plant_reaches_targets() {
    let cfg = ideal();
    for (i, t) in targets(10, 3).iter().enumerate() {
        let rec = run_harvest_cycle(t, ControllerKind::Proposed, &cfg, i as u64).unwrap();
        assert!(rec.final_error < 1e-3, "trial {i}: {}", rec.final_error);
        assert!(rec.transitions_valid());
    }
}

#[test]
fn halving_dt_barely_moves_the_result() {
    let cfg = ideal();
    let mut half = cfg.clone();
    half.settings.dt = cfg.settings.dt / 2.0;
    for (i, t) in targets(5, 11).iter().enumerate() {
        let a = run_harvest_cycle(t, ControllerKind::Proposed, &cfg, i as u64).unwrap();
        let b = run_harvest_cycle(t, ControllerKind::Proposed, &half, i as u64).unwrap();
        assert!(
            (a.final_error - b.final_error).abs() < 1e-6,
            "trial {i}: {} vs {}",
            a.final_error,
            b.final_error
        );
    }
}

#[test]
fn lyapunov_function_never_increases_on_ideal_runs() {
    let cfg = ideal();
    for (i, t) in targets(5, 5).iter().enumerate() {
        let rec = run_harvest_cycle(t, ControllerKind::Proposed, &cfg, i as u64).unwrap();
        let approach: Vec<&LogRow> = rec.log.iter().filter(|r| r.phase == Phase::Approach).collect();
        assert!(!approach.is_empty());
        for w in approach.windows(2) {
            assert!(w[1].v <= w[0].v + 1e-9, "V rose at t = {}", w[1].t);
        }
    }
}

#[test]
fn logged_rates_respect_saturation() {
    let cfg = SimConfig::default().with_plant(PlantModel::perturbed());
    for kind in ControllerKind::ALL {
        for (i, t) in targets(4, 9).iter().enumerate() {
            let rec = run_harvest_cycle(t, kind, &cfg, i as u64).unwrap();
            for r in &rec.log {
                assert!(r.omega_phi.abs() <= cfg.plant.pan_rate_limit + 1e-12);
                assert!(r.omega_theta.abs() <= cfg.plant.tilt_rate_limit + 1e-12);
            }
        }
    }
}

#[test]
fn aggressive_gains_saturate_without_exceeding_limits() {
    let mut cfg = ideal();
    cfg.gains.k1 = 400.0;
    cfg.gains.k2 = 400.0;
    cfg.plant.tilt_rate_limit = 0.3;
    let q0 = JointState::from_degrees(0.0, 0.0, 0.1);
    let p0 = forward_kinematics(&q0, &cfg.links);
    let reference = harvest_core::trajectory::plan_cartesian_reference(
        &CartesianPoint::new(p0.x, p0.y, p0.z + 0.05),
        &CartesianPoint::new(p0.x, p0.y, p0.z + 0.05),
        1.0,
    )
    .unwrap();
    let act = Actuators::nominal(&cfg.plant);
    let log = run_tracking(&q0, &reference, ControllerKind::Proposed, &act, &cfg, 0.3).unwrap();
    let peak = log.iter().map(|r| r.omega_theta.abs()).fold(0.0, f64::max);
    assert!((peak - 0.3).abs() < 1e-12, "peak tilt rate {peak}");
}

#[test]
fn phase_machine_in_logs() {
    let cfg = SimConfig::default().with_plant(PlantModel::perturbed());
    let t = targets(1, 2)[0];
    let rec = run_harvest_cycle(&t, ControllerKind::Proposed, &cfg, 4).unwrap();
    let order: Vec<Phase> = rec.phases.iter().map(|e| e.phase).collect();
    assert_eq!(
        order,
        [Phase::Idle, Phase::Localize, Phase::Approach, Phase::Detach, Phase::Return, Phase::Done]
    );
    let mut prev = Phase::Idle;
    for r in &rec.log {
        if r.phase != prev {
            assert!(prev.can_transition_to(r.phase), "{prev:?} -> {:?}", r.phase);
            prev = r.phase;
        }
    }
    for w in rec.log.windows(2) {
        assert!(w[1].t > w[0].t);
    }
}

#[test]
fn unreachable_target_fails_in_localize() {
    let cfg = ideal();
    let case2 = reference_cases()[1];
    let rec = run_harvest_cycle(&case2, ControllerKind::Proposed, &cfg, 0).unwrap();
    assert!(!rec.success);
    assert_eq!(rec.final_phase(), Phase::Failed);
    let f = rec.failure.clone().unwrap();
    assert_eq!(f.kind, FailureKind::Unreachable);
    assert_eq!(f.phase, Phase::Localize);
    assert!(rec.transitions_valid());
}

#[test]
fn target_outside_camera_view_fails_perception() {
    let mut cfg = ideal();
    // camera turned around to face away from the tree
    cfg.extrinsics = harvest_core::perception::RigidTransform::from_rows(
        [[0.0, 0.0, -1.0], [1.0, 0.0, 0.0], [0.0, -1.0, 0.0]],
        [-0.3, 0.0889, 0.0635],
    )
    .unwrap();
    let t = CartesianPoint::new(0.6876, -0.0505, 0.011);
    let rec = run_harvest_cycle(&t, ControllerKind::Proposed, &cfg, 0).unwrap();
    assert_eq!(rec.failure.unwrap().kind, FailureKind::Perception);
}

#[test]
fn trials_are_deterministic() {
    let cfg = SimConfig::default().with_plant(PlantModel::perturbed());
    let t = reference_cases()[0];
    for kind in ControllerKind::ALL {
        let a = run_harvest_cycle(&t, kind, &cfg, 77).unwrap();
        let b = run_harvest_cycle(&t, kind, &cfg, 77).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.log, b.log);
    }
    let b1 = run_batch(12, &SceneConfig::default(), ControllerKind::Proposed, &cfg, 9).unwrap();
    let b2 = run_batch(12, &SceneConfig::default(), ControllerKind::Proposed, &cfg, 9).unwrap();
    assert_eq!(b1, b2);
    assert_eq!(
        serde_json::to_string(&b1.summary).unwrap(),
        serde_json::to_string(&b2.summary).unwrap()
    );
}

#[test]
fn ideal_batch_is_precise() {
    let mut cfg = ideal();
    cfg.settings.log_decimation = 0;
    let b = run_batch(60, &SceneConfig::default(), ControllerKind::Proposed, &cfg, 1).unwrap();
    assert_eq!(b.summary.success_rate, 1.0);
    assert!(b.summary.max_error_m < 1e-3, "{}", b.summary.max_error_m);
}

#[test]
fn ideal_comparison_is_degenerate() {
    let cfg = ideal();
    let table = compare_controllers(&reference_cases(), 2, &cfg, 3).unwrap();
    assert_eq!(table.rows.len(), 9);
    for r in &table.rows {
        assert!(r.mean_error_mm < 0.1, "{r:?}");
    }
    assert!(table.rows.iter().filter(|r| r.case == 2).all(|r| r.flag == "widened_limits"));
    assert!(table.rows.iter().filter(|r| r.case != 2).all(|r| r.flag.is_empty()));
}

#[test]
fn comparison_flags_truly_unreachable_cases() {
    let cfg = ideal();
    let far = CartesianPoint::new(0.7, 0.9, 0.0);
    let steep = CartesianPoint::new(0.5, 0.0889, 0.0635 - 0.6985 * 40f64.to_radians().sin());
    let table = compare_controllers(&[far, steep], 1, &cfg, 0).unwrap();
    for r in &table.rows {
        assert_eq!(r.flag, "unreachable");
        assert!(r.mean_error_mm.is_nan());
    }
    assert!(!table.ordering_holds(1));
}

#[test]
fn widened_limits_are_visible_in_motion_tests() {
    let cfg = ideal();
    let case2 = reference_cases()[1];
    assert!(run_motion_test(&case2, ControllerKind::Proposed, &cfg, 0).is_err());
    let mut wide = cfg.clone();
    wide.limits = JointLimits::default().with_revolute_deg(28.0);
    let m = run_motion_test(&case2, ControllerKind::Proposed, &wide, 0).unwrap();
    assert!(m.final_error < 1e-3);
}

#[test]
fn invalid_configs_are_rejected() {
    let mut cfg = ideal();
    cfg.settings.dt = 0.0;
    let t = reference_cases()[0];
    assert!(matches!(
        run_harvest_cycle(&t, ControllerKind::Proposed, &cfg, 0),
        Err(SimError::InvalidConfig(_))
    ));
    let mut cfg = ideal();
    cfg.budget.detach = -1.0;
    assert!(run_batch(1, &SceneConfig::default(), ControllerKind::Proposed, &cfg, 0).is_err());
    assert!(compare_controllers(&reference_cases(), 0, &ideal(), 0).is_err());
}
