#![allow(dead_code)]

use camtraj_core::nalgebra::{Matrix3, Quaternion, UnitQuaternion, Vector3};
use camtraj_core::{CameraPose, Convention, Extrinsics, Intrinsics, Trajectory};
use proptest::prelude::*;

pub fn unit_quaternion() -> impl Strategy<Value = UnitQuaternion<f64>> {
    prop::array::uniform4(-1.0f64..1.0).prop_filter_map("near-zero quaternion", |[w, x, y, z]| {
        let q = Quaternion::new(w, x, y, z);
        (q.norm() > 0.1).then(|| UnitQuaternion::from_quaternion(q))
    })
}

pub fn rotation() -> impl Strategy<Value = Matrix3<f64>> {
    unit_quaternion().prop_map(|q| q.to_rotation_matrix().into_inner())
}

pub fn vector(r: f64) -> impl Strategy<Value = Vector3<f64>> {
    prop::array::uniform3(-r..r).prop_map(Vector3::from)
}

pub fn unit_vector() -> impl Strategy<Value = Vector3<f64>> {
    vector(1.0).prop_filter_map("near-zero vector", |v| {
        (v.norm() > 0.1).then(|| v.normalize())
    })
}

pub fn convention() -> impl Strategy<Value = Convention> {
    prop_oneof![
        Just(Convention::WorldToCamera),
        Just(Convention::CameraToWorld)
    ]
}

pub fn extrinsics_in(c: Convention) -> impl Strategy<Value = Extrinsics> {
    (rotation(), vector(10.0)).prop_map(move |(r, t)| Extrinsics::new(r, t, c).unwrap())
}

pub fn extrinsics() -> impl Strategy<Value = Extrinsics> {
    convention().prop_flat_map(extrinsics_in)
}

pub fn intrinsics(w: usize, h: usize) -> impl Strategy<Value = Intrinsics> {
    (
        20.0..2000.0f64,
        20.0..2000.0f64,
        0.0..w as f64,
        0.0..h as f64,
    )
        .prop_map(|(fx, fy, cx, cy)| Intrinsics::new(fx, fy, cx, cy).unwrap())
}

pub fn pose(w: usize, h: usize) -> impl Strategy<Value = CameraPose> {
    (intrinsics(w, h), extrinsics()).prop_map(|(k, e)| CameraPose::new(k, e))
}

/// World-to-camera trajectory with `n` frames and fixed intrinsics.
pub fn trajectory(n: usize) -> impl Strategy<Value = Trajectory> {
    prop::collection::vec(extrinsics_in(Convention::WorldToCamera), n).prop_map(|es| {
        let k = Intrinsics::new(100.0, 100.0, 32.0, 24.0).unwrap();
        let poses = es.into_iter().map(|e| CameraPose::new(k, e)).collect();
        Trajectory::new(poses, 64, 48).unwrap()
    })
}

pub fn trajectory_pair(
    frames: std::ops::Range<usize>,
) -> impl Strategy<Value = (Trajectory, Trajectory)> {
    frames.prop_flat_map(|n| (trajectory(n), trajectory(n)))
}

/// Plain row-major 4×4 product, independent of the library's matrix types.
pub type Mat4 = [[f64; 4]; 4];

pub fn homogeneous(e: &Extrinsics) -> Mat4 {
    let (r, t) = (e.rotation(), e.translation());
    let mut m = [[0.0; 4]; 4];
    for i in 0..3 {
        for j in 0..3 {
            m[i][j] = r[(i, j)];
        }
        m[i][3] = t[i];
    }
    m[3][3] = 1.0;
    m
}

pub fn matmul4(a: &Mat4, b: &Mat4) -> Mat4 {
    let mut c = [[0.0; 4]; 4];
    for i in 0..4 {
        for j in 0..4 {
            c[i][j] = (0..4).map(|k| a[i][k] * b[k][j]).sum();
        }
    }
    c
}

pub fn max_diff4(a: &Mat4, b: &Mat4) -> f64 {
    a.iter()
        .flatten()
        .zip(b.iter().flatten())
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

pub fn max_diff_extrinsics(a: &Extrinsics, b: &Extrinsics) -> f64 {
    max_diff4(&homogeneous(a), &homogeneous(b))
}
