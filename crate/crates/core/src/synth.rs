//! Camera trajectory synthesis.
//!
//! Synthesized trajectories are camera-to-world and start at the identity
//! pose, so they can be compared directly against relativized trajectories.
//! Extrinsic motions (pan, zoom, rotate) and intrinsic motions (principal
//! point shift, focal zoom) can be combined with [`compose_motions`].

use nalgebra::Vector3;
use thiserror::Error;

use crate::geometry::{
    rotation_about_axis, CameraPose, Convention, Extrinsics, GeometryError, Intrinsics, Trajectory,
    UNIT_AXIS_TOLERANCE,
};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SynthError {
    #[error("direction is not unit length (norm = {0})")]
    NonUnitDirection(f64),

    #[error("rotation axis is not unit length (norm = {0})")]
    NonUnitAxis(f64),

    #[error("focal scale factor must be positive and finite (got {0})")]
    NonPositiveScale(f64),

    #[error("{0} must be finite")]
    NonFinite(&'static str),

    #[error("no motion directives given")]
    EmptyDirectives,

    #[error("invalid frame count: {0}")]
    InvalidFrameCount(String),

    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

/// Which intrinsic parameter an intrinsic motion drives.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum IntrinsicMotion {
    /// `cx_i = cx + i·dx`, `cy_i = cy + i·dy` (pixels per frame).
    PrincipalShift { dx: f64, dy: f64 },
    /// `fx_i = fx·sⁱ`, `fy_i = fy·sⁱ`.
    FocalZoom { scale: f64 },
}

/// One synthesis directive. Frame `i` of a directive is a rigid transform
/// (camera-to-world) and/or an intrinsic adjustment.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Motion {
    /// Camera center moves `i·interval` along a unit world direction.
    Pan {
        direction: Vector3<f64>,
        interval: f64,
    },
    /// Translation along the optical axis (+z is forward).
    Zoom {
        interval: f64,
    },
    /// Uniform rotation reaching `total_radians` at the last frame. With no
    /// orbit radius the camera turns in place; otherwise it orbits the point
    /// `orbit_radius` units along its initial optical axis.
    Rotate {
        axis: Vector3<f64>,
        total_radians: f64,
        orbit_radius: Option<f64>,
    },
    Intrinsic(IntrinsicMotion),
}

impl Motion {
    pub fn validate(&self, frames: usize) -> Result<(), SynthError> {
        match *self {
            Motion::Pan {
                direction,
                interval,
            } => {
                let norm = direction.norm();
                if (norm - 1.0).abs().is_nan() || (norm - 1.0).abs() > UNIT_AXIS_TOLERANCE {
                    return Err(SynthError::NonUnitDirection(norm));
                }
                finite(interval, "interval")
            }
            Motion::Zoom { interval } => finite(interval, "interval"),
            Motion::Rotate {
                axis,
                total_radians,
                orbit_radius,
            } => {
                let norm = axis.norm();
                if (norm - 1.0).abs().is_nan() || (norm - 1.0).abs() > UNIT_AXIS_TOLERANCE {
                    return Err(SynthError::NonUnitAxis(norm));
                }
                finite(total_radians, "rotation angle")?;
                if let Some(r) = orbit_radius {
                    finite(r, "orbit radius")?;
                }
                if frames < 2 && total_radians != 0.0 {
                    return Err(SynthError::InvalidFrameCount(
                        "a nonzero rotation needs at least 2 frames".into(),
                    ));
                }
                Ok(())
            }
            Motion::Intrinsic(IntrinsicMotion::PrincipalShift { dx, dy }) => {
                finite(dx, "dx")?;
                finite(dy, "dy")
            }
            Motion::Intrinsic(IntrinsicMotion::FocalZoom { scale }) => {
                if scale.is_finite() && scale > 0.0 {
                    Ok(())
                } else {
                    Err(SynthError::NonPositiveScale(scale))
                }
            }
        }
    }

    /// Rigid transform contributed at frame `i` of `frames`.
    fn extrinsic_at(&self, i: usize, frames: usize) -> Result<Extrinsics, SynthError> {
        let c2w = Convention::CameraToWorld;
        let e = match *self {
            Motion::Pan {
                direction,
                interval,
            } => Extrinsics::new(
                nalgebra::Matrix3::identity(),
                direction * (i as f64 * interval),
                c2w,
            )?,
            Motion::Zoom { interval } => Extrinsics::new(
                nalgebra::Matrix3::identity(),
                Vector3::new(0.0, 0.0, i as f64 * interval),
                c2w,
            )?,
            Motion::Rotate {
                axis,
                total_radians,
                orbit_radius,
            } => {
                let angle = if frames > 1 {
                    total_radians * i as f64 / (frames - 1) as f64
                } else {
                    0.0
                };
                let rotation = rotation_about_axis(&axis, angle)?;
                let translation = match orbit_radius {
                    // T(p) · R · T(-p) with pivot p on the initial optical axis
                    Some(r) => {
                        let pivot = Vector3::new(0.0, 0.0, r);
                        pivot - rotation * pivot
                    }
                    None => Vector3::zeros(),
                };
                Extrinsics::new(rotation, translation, c2w)?
            }
            Motion::Intrinsic(_) => Extrinsics::identity(c2w),
        };
        Ok(e)
    }

    fn apply_intrinsics(&self, i: usize, k: &mut [f64; 4]) {
        match *self {
            Motion::Intrinsic(IntrinsicMotion::PrincipalShift { dx, dy }) => {
                k[2] += i as f64 * dx;
                k[3] += i as f64 * dy;
            }
            Motion::Intrinsic(IntrinsicMotion::FocalZoom { scale }) => {
                let f = scale.powi(i as i32);
                k[0] *= f;
                k[1] *= f;
            }
            _ => {}
        }
    }
}

fn finite(v: f64, what: &'static str) -> Result<(), SynthError> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(SynthError::NonFinite(what))
    }
}

/// Combines directives frame by frame. Frame `i` extrinsics are the matrix
/// product `D₁(i) · D₂(i) · … · D_k(i)` in list order; intrinsic directives
/// are applied to the base intrinsics in list order.
pub fn compose_motions(
    motions: &[Motion],
    frames: usize,
    intrinsics: Intrinsics,
    width: usize,
    height: usize,
) -> Result<Trajectory, SynthError> {
    if motions.is_empty() {
        return Err(SynthError::EmptyDirectives);
    }
    if frames == 0 {
        return Err(SynthError::InvalidFrameCount(
            "at least 1 frame is required".into(),
        ));
    }
    for m in motions {
        m.validate(frames)?;
    }
    let mut poses = Vec::with_capacity(frames);
    for i in 0..frames {
        let mut e = Extrinsics::identity(Convention::CameraToWorld);
        let mut k = [
            intrinsics.fx(),
            intrinsics.fy(),
            intrinsics.cx(),
            intrinsics.cy(),
        ];
        for m in motions {
            e = e.compose(&m.extrinsic_at(i, frames)?)?;
            m.apply_intrinsics(i, &mut k);
        }
        let intr = Intrinsics::new(k[0], k[1], k[2], k[3])?;
        poses.push(CameraPose::new(intr, e));
    }
    Ok(Trajectory::new(poses, width, height)?)
}

/// Straight-line translation with fixed orientation.
pub fn synth_pan(
    direction: Vector3<f64>,
    interval: f64,
    frames: usize,
    intrinsics: Intrinsics,
    width: usize,
    height: usize,
) -> Result<Trajectory, SynthError> {
    compose_motions(
        &[Motion::Pan {
            direction,
            interval,
        }],
        frames,
        intrinsics,
        width,
        height,
    )
}

/// In-place uniform rotation; the last frame is rotated by `total_degrees`.
pub fn synth_rotation(
    axis: Vector3<f64>,
    total_degrees: f64,
    frames: usize,
    intrinsics: Intrinsics,
    width: usize,
    height: usize,
) -> Result<Trajectory, SynthError> {
    compose_motions(
        &[Motion::Rotate {
            axis,
            total_radians: total_degrees.to_radians(),
            orbit_radius: None,
        }],
        frames,
        intrinsics,
        width,
        height,
    )
}

/// Camera motion expressed purely through intrinsics; extrinsics stay identity.
pub fn synth_intrinsic_motion(
    motion: IntrinsicMotion,
    frames: usize,
    base: Intrinsics,
    width: usize,
    height: usize,
) -> Result<Trajectory, SynthError> {
    compose_motions(&[Motion::Intrinsic(motion)], frames, base, width, height)
}

/// Scales every camera center about frame 0's center by `k`; orientations
/// and intrinsics are untouched.
pub fn scale_intensity(traj: &Trajectory, k: f64) -> Trajectory {
    let origin = traj.poses()[0].camera_center();
    let extrinsics = traj
        .poses()
        .iter()
        .map(|p| {
            let e = &p.extrinsics;
            let center = origin + (p.camera_center() - origin) * k;
            let translation = match e.convention() {
                Convention::CameraToWorld => center,
                Convention::WorldToCamera => -(e.rotation() * center),
            };
            Extrinsics::new(*e.rotation(), translation, e.convention())
                .expect("rotation unchanged and translation finite for finite k")
        })
        .collect();
    traj.with_extrinsics(extrinsics)
}

/// A validated synthesis request: frame count, image size, base intrinsics
/// and the directives to compose.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthPlan {
    pub frames: usize,
    pub width: usize,
    pub height: usize,
    pub intrinsics: Intrinsics,
    pub motions: Vec<Motion>,
}

impl SynthPlan {
    pub fn build(&self) -> Result<Trajectory, SynthError> {
        compose_motions(
            &self.motions,
            self.frames,
            self.intrinsics,
            self.width,
            self.height,
        )
    }
}
