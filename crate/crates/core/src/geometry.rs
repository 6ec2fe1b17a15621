//! Camera pose value types and rigid-transform utilities.
//!
//! Every [`Extrinsics`] value carries an explicit [`Convention`] tag so that
//! world-to-camera and camera-to-world matrices can never be mixed silently.
//! Angles are radians throughout.

use nalgebra::{Matrix3, Matrix4, Vector3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Maximum deviation of `RᵀR` from identity (and of `det R` from 1) accepted
/// when constructing [`Extrinsics`].
pub const ORTHONORMAL_TOLERANCE: f64 = 1e-6;

/// Maximum deviation of an axis norm from 1.
pub const UNIT_AXIS_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeometryError {
    #[error("intrinsics invalid: {0}")]
    InvalidIntrinsics(String),

    #[error("rotation is not orthonormal (max |RᵀR - I| = {orthogonality:e}, det = {det})")]
    RotationInvalid { orthogonality: f64, det: f64 },

    #[error("translation has non-finite components")]
    NonFiniteTranslation,

    #[error("extrinsics conventions differ: {left:?} vs {right:?}")]
    ConventionMismatch { left: Convention, right: Convention },

    #[error("axis is not unit length (norm = {0})")]
    NonUnitAxis(f64),

    #[error("trajectory invalid: {0}")]
    InvalidTrajectory(String),
}

/// Which direction an extrinsic matrix maps.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Convention {
    /// `x_cam = R x_world + t`.
    WorldToCamera,
    /// `x_world = R x_cam + t`.
    CameraToWorld,
}

impl Convention {
    pub fn opposite(self) -> Self {
        match self {
            Convention::WorldToCamera => Convention::CameraToWorld,
            Convention::CameraToWorld => Convention::WorldToCamera,
        }
    }
}

/// Pinhole intrinsics in pixels.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Intrinsics {
    fx: f64,
    fy: f64,
    cx: f64,
    cy: f64,
}

impl Intrinsics {
    pub fn new(fx: f64, fy: f64, cx: f64, cy: f64) -> Result<Self, GeometryError> {
        if ![fx, fy, cx, cy].iter().all(|v| v.is_finite()) {
            return Err(GeometryError::InvalidIntrinsics(
                "all fields must be finite".into(),
            ));
        }
        if fx <= 0.0 || fy <= 0.0 {
            return Err(GeometryError::InvalidIntrinsics(format!(
                "focal lengths must be positive (fx = {fx}, fy = {fy})"
            )));
        }
        Ok(Self { fx, fy, cx, cy })
    }

    pub fn fx(&self) -> f64 {
        self.fx
    }

    pub fn fy(&self) -> f64 {
        self.fy
    }

    pub fn cx(&self) -> f64 {
        self.cx
    }

    pub fn cy(&self) -> f64 {
        self.cy
    }

    /// The 3×3 calibration matrix `K`.
    pub fn matrix(&self) -> Matrix3<f64> {
        Matrix3::new(self.fx, 0.0, self.cx, 0.0, self.fy, self.cy, 0.0, 0.0, 1.0)
    }

    /// `K⁻¹`, written out in closed form.
    pub fn inverse_matrix(&self) -> Matrix3<f64> {
        Matrix3::new(
            1.0 / self.fx,
            0.0,
            -self.cx / self.fx,
            0.0,
            1.0 / self.fy,
            -self.cy / self.fy,
            0.0,
            0.0,
            1.0,
        )
    }

    /// `K⁻¹ [u, v, 1]ᵀ`.
    pub fn unproject(&self, u: f64, v: f64) -> Vector3<f64> {
        Vector3::new((u - self.cx) / self.fx, (v - self.cy) / self.fy, 1.0)
    }
}

/// Rigid transform `[R | t]` tagged with the direction it maps.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Extrinsics {
    rotation: Matrix3<f64>,
    translation: Vector3<f64>,
    convention: Convention,
}

impl Extrinsics {
    /// Validates orthonormality and finiteness. No repair is attempted; see
    /// [`Extrinsics::orthonormalized`] for that.
    pub fn new(
        rotation: Matrix3<f64>,
        translation: Vector3<f64>,
        convention: Convention,
    ) -> Result<Self, GeometryError> {
        check_rotation(&rotation)?;
        if !translation.iter().all(|v| v.is_finite()) {
            return Err(GeometryError::NonFiniteTranslation);
        }
        Ok(Self {
            rotation,
            translation,
            convention,
        })
    }

    /// Projects `rotation` onto the nearest proper rotation (SVD polar factor)
    /// before validating.
    pub fn orthonormalized(
        rotation: Matrix3<f64>,
        translation: Vector3<f64>,
        convention: Convention,
    ) -> Result<Self, GeometryError> {
        Self::new(orthonormalize(&rotation)?, translation, convention)
    }

    pub fn identity(convention: Convention) -> Self {
        Self {
            rotation: Matrix3::identity(),
            translation: Vector3::zeros(),
            convention,
        }
    }

    pub fn rotation(&self) -> &Matrix3<f64> {
        &self.rotation
    }

    pub fn translation(&self) -> &Vector3<f64> {
        &self.translation
    }

    pub fn convention(&self) -> Convention {
        self.convention
    }

    pub fn to_homogeneous(&self) -> Matrix4<f64> {
        let mut m = Matrix4::identity();
        m.fixed_view_mut::<3, 3>(0, 0).copy_from(&self.rotation);
        m.fixed_view_mut::<3, 1>(0, 3).copy_from(&self.translation);
        m
    }

    /// The inverse rigid transform, tagged with the opposite convention.
    /// Describes the same camera.
    pub fn inverse(&self) -> Self {
        let mut inv = self.inverse_transform();
        inv.convention = self.convention.opposite();
        inv
    }

    /// The inverse rigid transform keeping this value's convention tag.
    pub fn inverse_transform(&self) -> Self {
        let rt = self.rotation.transpose();
        Self {
            rotation: rt,
            translation: -(rt * self.translation),
            convention: self.convention,
        }
    }

    /// The same camera expressed in `convention`.
    pub fn to_convention(&self, convention: Convention) -> Self {
        if self.convention == convention {
            *self
        } else {
            self.inverse()
        }
    }

    /// `self ∘ other`: applies `other` first, then `self`.
    pub fn compose(&self, other: &Extrinsics) -> Result<Self, GeometryError> {
        if self.convention != other.convention {
            return Err(GeometryError::ConventionMismatch {
                left: self.convention,
                right: other.convention,
            });
        }
        Ok(Self {
            rotation: self.rotation * other.rotation,
            translation: self.rotation * other.translation + self.translation,
            convention: self.convention,
        })
    }

    /// Applies the transform to a point.
    pub fn transform_point(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.rotation * p + self.translation
    }

    /// World-space position of the camera.
    pub fn camera_center(&self) -> Vector3<f64> {
        match self.convention {
            Convention::CameraToWorld => self.translation,
            Convention::WorldToCamera => -(self.rotation.transpose() * self.translation),
        }
    }
}

/// Inverse of `e`, tagged with the opposite convention.
pub fn invert_extrinsics(e: &Extrinsics) -> Extrinsics {
    e.inverse()
}

/// `a ∘ b`; both must share a convention.
pub fn compose(a: &Extrinsics, b: &Extrinsics) -> Result<Extrinsics, GeometryError> {
    a.compose(b)
}

fn check_rotation(r: &Matrix3<f64>) -> Result<(), GeometryError> {
    let orthogonality = (r.transpose() * r - Matrix3::identity()).amax();
    let det = r.determinant();
    if !orthogonality.is_finite()
        || orthogonality >= ORTHONORMAL_TOLERANCE
        || (det - 1.0).abs().is_nan()
        || (det - 1.0).abs() > ORTHONORMAL_TOLERANCE
    {
        return Err(GeometryError::RotationInvalid { orthogonality, det });
    }
    Ok(())
}

/// Nearest proper rotation to `m` in the Frobenius sense.
pub fn orthonormalize(m: &Matrix3<f64>) -> Result<Matrix3<f64>, GeometryError> {
    if !m.iter().all(|v| v.is_finite()) {
        return Err(GeometryError::RotationInvalid {
            orthogonality: f64::NAN,
            det: f64::NAN,
        });
    }
    let svd = m.svd(true, true);
    let (u, v_t) = match (svd.u, svd.v_t) {
        (Some(u), Some(v_t)) => (u, v_t),
        _ => unreachable!("both singular vector sets were requested"),
    };
    let mut d = Matrix3::identity();
    if (u * v_t).determinant() < 0.0 {
        d[(2, 2)] = -1.0;
    }
    Ok(u * d * v_t)
}

/// Rodrigues rotation about a unit `axis` by `angle` radians.
pub fn rotation_about_axis(axis: &Vector3<f64>, angle: f64) -> Result<Matrix3<f64>, GeometryError> {
    let norm = axis.norm();
    if (norm - 1.0).abs().is_nan() || (norm - 1.0).abs() > UNIT_AXIS_TOLERANCE {
        return Err(GeometryError::NonUnitAxis(norm));
    }
    let k = axis / norm;
    let skew = Matrix3::new(0.0, -k.z, k.y, k.z, 0.0, -k.x, -k.y, k.x, 0.0);
    let (s, c) = angle.sin_cos();
    Ok(Matrix3::identity() + skew * s + skew * skew * (1.0 - c))
}

/// Intrinsics and extrinsics of one frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CameraPose {
    pub intrinsics: Intrinsics,
    pub extrinsics: Extrinsics,
}

impl CameraPose {
    pub fn new(intrinsics: Intrinsics, extrinsics: Extrinsics) -> Self {
        Self {
            intrinsics,
            extrinsics,
        }
    }

    pub fn camera_center(&self) -> Vector3<f64> {
        self.extrinsics.camera_center()
    }

    pub fn to_convention(&self, convention: Convention) -> Self {
        Self {
            intrinsics: self.intrinsics,
            extrinsics: self.extrinsics.to_convention(convention),
        }
    }
}

/// Ordered poses sharing one extrinsics convention, plus image dimensions.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    poses: Vec<CameraPose>,
    width: usize,
    height: usize,
}

impl Trajectory {
    pub fn new(poses: Vec<CameraPose>, width: usize, height: usize) -> Result<Self, GeometryError> {
        if poses.is_empty() {
            return Err(GeometryError::InvalidTrajectory(
                "at least one pose is required".into(),
            ));
        }
        if width == 0 || height == 0 {
            return Err(GeometryError::InvalidTrajectory(format!(
                "image dimensions must be positive (got {width}x{height})"
            )));
        }
        let convention = poses[0].extrinsics.convention();
        if let Some(i) = poses
            .iter()
            .position(|p| p.extrinsics.convention() != convention)
        {
            return Err(GeometryError::InvalidTrajectory(format!(
                "pose {i} uses {:?} but pose 0 uses {convention:?}",
                poses[i].extrinsics.convention()
            )));
        }
        Ok(Self {
            poses,
            width,
            height,
        })
    }

    pub fn poses(&self) -> &[CameraPose] {
        &self.poses
    }

    pub fn len(&self) -> usize {
        self.poses.len()
    }

    /// Always false; a trajectory holds at least one pose.
    pub fn is_empty(&self) -> bool {
        self.poses.is_empty()
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn convention(&self) -> Convention {
        self.poses[0].extrinsics.convention()
    }

    pub fn camera_centers(&self) -> Vec<Vector3<f64>> {
        self.poses.iter().map(CameraPose::camera_center).collect()
    }

    /// Every pose re-expressed in `convention`.
    pub fn to_convention(&self, convention: Convention) -> Self {
        Self {
            poses: self
                .poses
                .iter()
                .map(|p| p.to_convention(convention))
                .collect(),
            width: self.width,
            height: self.height,
        }
    }

    /// Replaces the extrinsics of every frame, keeping intrinsics and size.
    pub(crate) fn with_extrinsics(&self, extrinsics: Vec<Extrinsics>) -> Self {
        debug_assert_eq!(extrinsics.len(), self.poses.len());
        Self {
            poses: self
                .poses
                .iter()
                .zip(extrinsics)
                .map(|(p, e)| CameraPose::new(p.intrinsics, e))
                .collect(),
            width: self.width,
            height: self.height,
        }
    }
}

/// Re-expresses `traj` relative to its first frame, in world-to-camera form:
/// `E_rel_i = E_i · E_0⁻¹`. Frame 0 of the result is exactly the identity.
pub fn relativize(traj: &Trajectory) -> Trajectory {
    let w2c = traj.to_convention(Convention::WorldToCamera);
    let first_inv = w2c.poses[0].extrinsics.inverse_transform();
    let rel = w2c
        .poses
        .iter()
        .enumerate()
        .map(|(i, p)| {
            if i == 0 {
                Extrinsics::identity(Convention::WorldToCamera)
            } else {
                let e = &p.extrinsics;
                Extrinsics {
                    rotation: e.rotation * first_inv.rotation,
                    translation: e.rotation * first_inv.translation + e.translation,
                    convention: Convention::WorldToCamera,
                }
            }
        })
        .collect();
    w2c.with_extrinsics(rel)
}
