mod common;

use camtraj_core::metrics::{evaluate, rot_err, rotation_angle_between, trans_err, MetricsError};
use camtraj_core::nalgebra::{Matrix3, Rotation3, Unit, Vector3};
use camtraj_core::synth::{compose_motions, scale_intensity, synth_rotation, Motion};
use camtraj_core::{CameraPose, Convention, Extrinsics, Intrinsics, Trajectory};
use common::*;
use proptest::prelude::*;

fn base_intrinsics() -> Intrinsics {
    Intrinsics::new(192.0, 228.0, 192.0, 128.0).unwrap()
}

fn motion() -> impl Strategy<Value = Motion> {
    prop_oneof![
        (unit_vector(), -1.0..1.0f64).prop_map(|(direction, interval)| Motion::Pan {
            direction,
            interval
        }),
        (-1.0..1.0f64).prop_map(|interval| Motion::Zoom { interval }),
        (unit_vector(), -3.0..3.0f64, prop::option::of(0.5..5.0f64)).prop_map(
            |(axis, total_radians, orbit_radius)| Motion::Rotate {
                axis,
                total_radians,
                orbit_radius
            }
        ),
    ]
}

/// Per-frame camera-to-world transform of a single directive, built from
/// first principles rather than through the synthesizer.
fn oracle_directive(m: &Motion, i: usize, n: usize) -> Mat4 {
    let (r, t) = match *m {
        Motion::Pan {
            direction,
            interval,
        } => (Matrix3::identity(), direction * (i as f64 * interval)),
        Motion::Zoom { interval } => (Matrix3::identity(), Vector3::z() * (i as f64 * interval)),
        Motion::Rotate {
            axis,
            total_radians,
            orbit_radius,
        } => {
            let angle = if n > 1 {
                total_radians * i as f64 / (n - 1) as f64
            } else {
                0.0
            };
            let r = *Rotation3::from_axis_angle(&Unit::new_normalize(axis), angle).matrix();
            let p = Vector3::new(0.0, 0.0, orbit_radius.unwrap_or(0.0));
            (r, p - r * p)
        }
        Motion::Intrinsic(_) => (Matrix3::identity(), Vector3::zeros()),
    };
    homogeneous(&Extrinsics::new(r, t, Convention::CameraToWorld).unwrap())
}

proptest! {
    #[test]
    fn composed_motions_match_matrix_products(
        motions in prop::collection::vec(motion(), 1..4),
        n in 2usize..12,
    ) {
        let traj = compose_motions(&motions, n, base_intrinsics(), 384, 256).unwrap();
        prop_assert_eq!(traj.convention(), Convention::CameraToWorld);
        for (i, p) in traj.poses().iter().enumerate() {
            let mut want = homogeneous(&Extrinsics::identity(Convention::CameraToWorld));
            for m in &motions {
                want = matmul4(&want, &oracle_directive(m, i, n));
            }
            prop_assert!(max_diff4(&homogeneous(&p.extrinsics), &want) < 1e-9);
            let r = p.extrinsics.rotation();
            prop_assert!((r.transpose() * r - Matrix3::identity()).amax() < 1e-9);
        }
    }

    #[test]
    fn rotation_angle_is_linear_in_frame(axis in unit_vector(), degrees in -179.0..179.0f64, n in 2usize..40) {
        let traj = synth_rotation(axis, degrees, n, base_intrinsics(), 384, 256).unwrap();
        for (i, p) in traj.poses().iter().enumerate() {
            let angle = degrees.to_radians() * i as f64 / (n - 1) as f64;
            prop_assert!((p.extrinsics.rotation().trace() - (1.0 + 2.0 * angle.cos())).abs() < 1e-9);
        }
    }

    #[test]
    fn intensity_scaling_composes(
        traj in (1usize..10).prop_flat_map(trajectory),
        c in convention(),
        a in 0.1..10.0f64,
        b in 0.1..10.0f64,
    ) {
        let t = traj.to_convention(c);
        let twice = scale_intensity(&scale_intensity(&t, a), b);
        let once = scale_intensity(&t, a * b);
        for (x, y) in twice.camera_centers().iter().zip(once.camera_centers()) {
            prop_assert!((x - y).amax() < 1e-9);
        }
        prop_assert_eq!(twice.convention(), c);
    }

    #[test]
    fn rot_err_is_symmetric((a, b) in trajectory_pair(1..10)) {
        let (ab, _) = rot_err(&a, &b).unwrap();
        let (ba, _) = rot_err(&b, &a).unwrap();
        prop_assert!((ab - ba).abs() < 1e-12);
    }

    #[test]
    fn rot_err_is_left_invariant((a, b) in trajectory_pair(1..8), q in rotation()) {
        let rotate = |t: &Trajectory| {
            let poses = t
                .poses()
                .iter()
                .map(|p| {
                    let e = &p.extrinsics;
                    let e = Extrinsics::new(q * e.rotation(), *e.translation(), e.convention()).unwrap();
                    CameraPose::new(p.intrinsics, e)
                })
                .collect();
            Trajectory::new(poses, t.width(), t.height()).unwrap()
        };
        let (_, before) = rot_err(&a, &b).unwrap();
        let (_, after) = rot_err(&rotate(&a), &rotate(&b)).unwrap();
        for (x, y) in before.iter().zip(&after) {
            prop_assert!((x - y).abs() < 1e-9);
        }
    }

    #[test]
    fn noisy_rotations_never_produce_nan(r in rotation(), noise in prop::array::uniform9(-1e-7..1e-7f64)) {
        let noisy = r + Matrix3::from_row_slice(&noise);
        let a = rotation_angle_between(&noisy, &r);
        let b = rotation_angle_between(&noisy, &noisy);
        let c = rotation_angle_between(&(-noisy), &noisy);
        prop_assert!(a.is_finite() && b.is_finite() && c.is_finite());
    }

    #[test]
    fn evaluation_ignores_generated_scale(
        (gt, gen) in trajectory_pair(2..12),
        log_s in -5.0..3.0f64,
    ) {
        let s = 10f64.powf(log_s);
        let base = evaluate(&gt, &gen).unwrap();
        let scaled = evaluate(&gt, &scale_intensity(&gen, s)).unwrap();
        prop_assert!((base.rot_err_total - scaled.rot_err_total).abs() < 1e-6);
        prop_assert!((base.trans_err_total - scaled.trans_err_total).abs() < 1e-6);
    }

    #[test]
    fn trans_err_zero_exactly_when_equal((a, b) in trajectory_pair(1..8)) {
        let (_, same) = trans_err(&a, &a).unwrap();
        prop_assert!(same.iter().all(|&v| v == 0.0));
        let (_, diff) = trans_err(&a, &b).unwrap();
        for (i, v) in diff.iter().enumerate() {
            let equal = a.poses()[i].extrinsics.translation() == b.poses()[i].extrinsics.translation();
            prop_assert_eq!(*v == 0.0, equal);
        }
    }
}

#[test]
fn mismatched_lengths_and_tiny_baselines_are_rejected() {
    let k = base_intrinsics();
    let pan = |step: f64, n: usize| {
        compose_motions(
            &[Motion::Pan {
                direction: Vector3::x(),
                interval: step,
            }],
            n,
            k,
            384,
            256,
        )
        .unwrap()
    };
    assert!(matches!(
        evaluate(&pan(1.0, 3), &pan(1.0, 4)),
        Err(MetricsError::LengthMismatch { .. })
    ));
    assert!(matches!(
        evaluate(&pan(1.0, 3), &pan(5e-9, 3)),
        Err(MetricsError::DegenerateBaseline { .. })
    ));
    assert!(evaluate(&pan(1.0, 3), &pan(2e-8, 3)).is_ok());
}
