use harvest_core::kinematics::CartesianPoint;
use harvest_core::perception::*;
use nalgebra::{Rotation3, Vector3};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn in_view_target() -> impl Strategy<Value = CartesianPoint> {
    (0.5f64..1.5, -0.3f64..0.3, -0.25f64..0.35).prop_map(|(x, y, z)| CartesianPoint::new(x, y, z))
}

proptest! {
    #[test]
    fn noiseless_pipeline_recovers_target(t in in_view_target(), seed in any::<u64>()) {
        let k = CameraIntrinsics::default();
        let tf = RigidTransform::default();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let det = synthesize_detection(&t, &tf, &k, &DetectionNoise::default(), &mut rng).unwrap();
        let p = localize(&det, &k, &tf).unwrap();
        prop_assert!(p.distance(&t) < 1e-9);
    }

    #[test]
    fn back_projection_is_homogeneous_in_depth(u in 100.0f64..1100.0, v in 100.0f64..600.0, z in 0.2f64..3.0, s in 0.1f64..5.0) {
        let k = CameraIntrinsics::default();
        let mk = |depth: f64| Detection::new(BoundingBox { u_min: u - 5.0, v_min: v - 5.0, u_max: u + 5.0, v_max: v + 5.0 }, vec![depth; 4]).unwrap();
        let a = back_project(&mk(z), &k).unwrap();
        let b = back_project(&mk(s * z), &k).unwrap();
        prop_assert!((b.x - s * a.x).abs() < 1e-12 * (1.0 + b.x.abs()));
        prop_assert!((b.y - s * a.y).abs() < 1e-12 * (1.0 + b.y.abs()));
        prop_assert!((b.z - s * a.z).abs() < 1e-12 * (1.0 + b.z.abs()));
    }

    #[test]
    fn rigid_transforms_preserve_distances(
        roll in -3.0f64..3.0, pitch in -1.5f64..1.5, yaw in -3.0f64..3.0,
        tx in -1.0f64..1.0, ty in -1.0f64..1.0, tz in -1.0f64..1.0,
        a in prop::array::uniform3(-2.0f64..2.0), b in prop::array::uniform3(-2.0f64..2.0),
    ) {
        let r = Rotation3::from_euler_angles(roll, pitch, yaw).into_inner();
        let t = RigidTransform::new(r, Vector3::new(tx, ty, tz)).unwrap();
        let pa = CartesianPoint::new(a[0], a[1], a[2]);
        let pb = CartesianPoint::new(b[0], b[1], b[2]);
        let d0 = pa.distance(&pb);
        let d1 = t.apply(&pa).distance(&t.apply(&pb));
        prop_assert!((d0 - d1).abs() < 1e-12);
        let back = t.inverse().apply(&t.apply(&pa));
        prop_assert!(back.distance(&pa) < 1e-12);
    }

    #[test]
    fn mean_depth_is_order_free_and_bounded(mut v in prop::collection::vec(0.1f64..5.0, 1..40), seed in any::<u64>()) {
        let bbox = BoundingBox { u_min: 0.0, v_min: 0.0, u_max: 10.0, v_max: 10.0 };
        let m = mean_depth(&Detection::new(bbox, v.clone()).unwrap()).unwrap();
        let lo = v.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        prop_assert!(m >= lo - 1e-12 && m <= hi + 1e-12);
        // deterministic shuffle
        let n = v.len();
        let mut s = seed;
        for i in (1..n).rev() {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            v.swap(i, (s >> 33) as usize % (i + 1));
        }
        let m2 = mean_depth(&Detection::new(bbox, v).unwrap()).unwrap();
        prop_assert!((m - m2).abs() < 1e-12);
    }
}

#[test]
fn detection_text_roundtrip() {
    let text = "# u_min,v_min,u_max,v_max,depths...\n600,340,680,400,0.9,0.91,nan,0\n";
    let dets = Detection::parse_many(text).unwrap();
    assert_eq!(dets.len(), 1);
    let again = Detection::parse_line(&dets[0].to_line()).unwrap();
    assert_eq!(again.bbox, dets[0].bbox);
    assert!((mean_depth(&again).unwrap() - 0.905).abs() < 1e-12);
    assert!(Detection::parse_line("1,2,3").is_err());
    assert!(Detection::parse_line("10,2,3,4,0.5").is_err());
}

#[test]
fn targets_outside_the_image_are_rejected() {
    let k = CameraIntrinsics::default();
    let tf = RigidTransform::default();
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let behind = CartesianPoint::new(-1.0, 0.0, 0.0);
    let wide = CartesianPoint::new(0.5, 3.0, 0.0);
    for t in [behind, wide] {
        let r = synthesize_detection(&t, &tf, &k, &DetectionNoise::default(), &mut rng);
        assert!(matches!(r, Err(PerceptionError::OutOfView(_))), "{t:?}");
    }
}
