mod common;

use camtraj_core::geometry::{compose, invert_extrinsics, orthonormalize, rotation_about_axis};
use camtraj_core::nalgebra::{Matrix3, Rotation3, Unit, Vector3};
use camtraj_core::{relativize, Convention, Extrinsics};
use common::*;
use proptest::prelude::*;

proptest! {
    #[test]
    fn double_inverse_is_identity(e in extrinsics()) {
        let back = invert_extrinsics(&invert_extrinsics(&e));
        prop_assert_eq!(back.convention(), e.convention());
        prop_assert!(max_diff_extrinsics(&back, &e) < 1e-9);
    }

    #[test]
    fn inverse_matches_homogeneous_oracle(e in extrinsics()) {
        let product = matmul4(&homogeneous(&e), &homogeneous(&e.inverse()));
        let identity = homogeneous(&Extrinsics::identity(e.convention()));
        prop_assert!(max_diff4(&product, &identity) < 1e-9);
    }

    #[test]
    fn compose_is_associative(
        c in convention(),
        seeds in prop::array::uniform3((rotation(), vector(10.0))),
    ) {
        let [a, b, d] = seeds.map(|(r, t)| Extrinsics::new(r, t, c).unwrap());
        let left = compose(&compose(&a, &b).unwrap(), &d).unwrap();
        let right = compose(&a, &compose(&b, &d).unwrap()).unwrap();
        prop_assert!(max_diff_extrinsics(&left, &right) < 1e-9);
    }

    #[test]
    fn compose_matches_homogeneous_product(
        (a, b) in convention().prop_flat_map(|c| (extrinsics_in(c), extrinsics_in(c)))
    ) {
        let got = homogeneous(&compose(&a, &b).unwrap());
        let want = matmul4(&homogeneous(&a), &homogeneous(&b));
        prop_assert!(max_diff4(&got, &want) < 1e-9);
    }

    #[test]
    fn camera_center_agrees_across_conventions(e in extrinsics()) {
        let other = e.to_convention(e.convention().opposite());
        prop_assert!((e.camera_center() - other.camera_center()).amax() < 1e-9);
        // The center maps to the camera origin under world-to-camera.
        let w2c = e.to_convention(Convention::WorldToCamera);
        prop_assert!(w2c.transform_point(&e.camera_center()).amax() < 1e-9);
    }

    #[test]
    fn relativize_pins_first_frame(traj in (1usize..12).prop_flat_map(trajectory), c in convention()) {
        let rel = relativize(&traj.to_convention(c));
        let first = &rel.poses()[0].extrinsics;
        prop_assert_eq!(rel.convention(), Convention::WorldToCamera);
        prop_assert_eq!(*first.rotation(), Matrix3::identity());
        prop_assert_eq!(*first.translation(), Vector3::zeros());
    }

    #[test]
    fn relativize_matches_homogeneous_oracle(traj in (2usize..8).prop_flat_map(trajectory)) {
        let rel = relativize(&traj);
        let first_inv = homogeneous(&traj.poses()[0].extrinsics.inverse_transform());
        for (p, q) in traj.poses().iter().zip(rel.poses()) {
            let want = matmul4(&homogeneous(&p.extrinsics), &first_inv);
            prop_assert!(max_diff4(&homogeneous(&q.extrinsics), &want) < 1e-9);
        }
    }

    #[test]
    fn rodrigues_is_a_rotation(axis in unit_vector(), angle in -10.0..10.0f64) {
        let r = rotation_about_axis(&axis, angle).unwrap();
        prop_assert!((r.transpose() * r - Matrix3::identity()).amax() < 1e-9);
        prop_assert!((r.determinant() - 1.0).abs() < 1e-9);
        let oracle = Rotation3::from_axis_angle(&Unit::new_normalize(axis), angle);
        prop_assert!((r - oracle.matrix()).amax() < 1e-9);
    }

    #[test]
    fn orthonormalize_repairs_noise(r in rotation(), noise in prop::array::uniform9(-1e-4..1e-4f64)) {
        let noisy = r + Matrix3::from_row_slice(&noise);
        let fixed = orthonormalize(&noisy).unwrap();
        prop_assert!((fixed.transpose() * fixed - Matrix3::identity()).amax() < 1e-12);
        prop_assert!((fixed - r).amax() < 1e-3);
    }
}
