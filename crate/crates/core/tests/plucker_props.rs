mod common;

use camtraj_core::geometry::Intrinsics;
use camtraj_core::nalgebra::{Matrix3, Vector3};
use camtraj_core::plucker::{plucker_at, plucker_map, plucker_sequence, PixelOrigin};
use camtraj_core::{CameraPose, Convention, Extrinsics, Trajectory};
use common::*;
use proptest::prelude::*;

fn split(p: [f64; 6]) -> (Vector3<f64>, Vector3<f64>) {
    (
        Vector3::new(p[0], p[1], p[2]),
        Vector3::new(p[3], p[4], p[5]),
    )
}

proptest! {
    #[test]
    fn rays_are_unit_and_moments_orthogonal(
        pose in pose(640, 480),
        u in 0.0..640.0f64,
        v in 0.0..480.0f64,
    ) {
        let (m, d) = split(plucker_at(&pose, u, v, PixelOrigin::Center));
        prop_assert!((d.norm() - 1.0).abs() < 1e-6);
        prop_assert!(m.dot(&d).abs() < 1e-6);
    }

    #[test]
    fn moment_ignores_point_along_ray(
        pose in pose(320, 240),
        u in 0.0..320.0f64,
        v in 0.0..240.0f64,
        lambda in -50.0..50.0f64,
    ) {
        let (m, d) = split(plucker_at(&pose, u, v, PixelOrigin::Corner));
        let shifted = (pose.camera_center() + d * lambda).cross(&d);
        prop_assert!((shifted - m).amax() < 1e-6);
    }

    /// Independent oracle: the ray direction, taken back into the camera and
    /// projected with K, lands on the pixel it came from.
    #[test]
    fn direction_reprojects_to_pixel(
        pose in pose(256, 256),
        u in 0usize..256,
        v in 0usize..256,
    ) {
        let (_, d) = split(plucker_at(&pose, u as f64, v as f64, PixelOrigin::Center));
        let w2c = pose.extrinsics.to_convention(Convention::WorldToCamera);
        let cam = w2c.rotation() * d;
        prop_assert!(cam.z > 0.0);
        let k = &pose.intrinsics;
        let px = k.fx() * cam.x / cam.z + k.cx();
        let py = k.fy() * cam.y / cam.z + k.cy();
        prop_assert!((px - (u as f64 + 0.5)).abs() < 1e-6);
        prop_assert!((py - (v as f64 + 0.5)).abs() < 1e-6);
    }

    #[test]
    fn map_agrees_with_pointwise_embedding(pose in pose(24, 16)) {
        let map = plucker_map(&pose, 24, 16, PixelOrigin::Center);
        prop_assert_eq!(map.tensor().shape(), &[6, 16, 24]);
        for v in 0..16 {
            for u in 0..24 {
                let want = plucker_at(&pose, u as f64, v as f64, PixelOrigin::Center);
                let got = map.pixel(u, v);
                for c in 0..6 {
                    prop_assert_eq!(got[c], want[c] as f32);
                }
            }
        }
    }

    /// Mirroring the image left-right is the same as reflecting the world in
    /// x: with F = diag(-1, 1, 1), R' = F R F, o' = F o, cx' = w - cx. The
    /// mirrored embedding is then (m_x, -m_y, -m_z, -d_x, d_y, d_z) at the
    /// flipped column. Dyadic cx and integer sizes keep every step exact.
    #[test]
    fn horizontal_flip_is_a_signed_channel_permutation(
        r in rotation(),
        t in vector(5.0),
        w in 4usize..40,
        h in 4usize..24,
        cx_eighths in 0u32..320,
        fx in 20.0..400.0f64,
    ) {
        let cx = (cx_eighths as f64 / 8.0).min(w as f64);
        let k = Intrinsics::new(fx, fx * 1.1, cx, h as f64 / 2.0).unwrap();
        let pose = CameraPose::new(k, Extrinsics::new(r, t, Convention::CameraToWorld).unwrap());
        let f = Matrix3::from_diagonal(&Vector3::new(-1.0, 1.0, 1.0));
        let k_m = Intrinsics::new(fx, fx * 1.1, w as f64 - cx, h as f64 / 2.0).unwrap();
        let e_m = Extrinsics::new(f * r * f, f * t, Convention::CameraToWorld).unwrap();
        let mirrored = CameraPose::new(k_m, e_m);

        let a = plucker_map(&pose, w, h, PixelOrigin::Center);
        let b = plucker_map(&mirrored, w, h, PixelOrigin::Center);
        let sign = [1.0f32, -1.0, -1.0, -1.0, 1.0, 1.0];
        for v in 0..h {
            for u in 0..w {
                let pa = a.pixel(u, v);
                let pb = b.pixel(w - 1 - u, v);
                for c in 0..6 {
                    prop_assert_eq!(pb[c].to_bits(), (sign[c] * pa[c]).to_bits(), "u={} v={} c={}", u, v, c);
                }
            }
        }
    }

    #[test]
    fn sequence_stacks_frame_maps(poses in prop::collection::vec(pose(12, 8), 1..5)) {
        let traj = Trajectory::new(
            poses.iter().map(|p| p.to_convention(Convention::WorldToCamera)).collect(),
            12,
            8,
        )
        .unwrap();
        let seq = plucker_sequence(&traj, PixelOrigin::Center);
        prop_assert_eq!(seq.tensor().shape(), &[poses.len(), 6, 8, 12]);
        for (i, p) in traj.poses().iter().enumerate() {
            let map = plucker_map(p, 12, 8, PixelOrigin::Center);
            prop_assert_eq!(seq.frame(i), map.tensor().data());
        }
    }
}
