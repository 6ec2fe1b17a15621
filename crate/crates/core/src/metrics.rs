//! Rotation and translation error between a reference and a generated
//! trajectory.
//!
//! * `RotErr   = Σᵢ arccos((tr(R_gen,i · R_gt,iᵀ) − 1) / 2)`
//! * `TransErr = Σᵢ ‖T_gt,i − T_gen,i‖²`
//!
//! [`evaluate`] first re-expresses both trajectories relative to their first
//! frame, then rescales the generated translations so that the gap between
//! the first two frames matches the reference (structure-from-motion output
//! has no metric scale). Totals are plain sums over frames; frame 0 is
//! included and contributes zero after relativization.

use nalgebra::Vector3;
use serde::Serialize;
use thiserror::Error;

use crate::geometry::{relativize, Convention, Extrinsics, Trajectory};

/// TransErr lower bound on the RealEstate10K test set, obtained by comparing
/// COLMAP re-estimates of real clips against the dataset's own poses.
/// Reference value only.
pub const REALESTATE10K_TRANS_ERR_LOWER_BOUND: f64 = 6.93;

/// RotErr counterpart of [`REALESTATE10K_TRANS_ERR_LOWER_BOUND`].
pub const REALESTATE10K_ROT_ERR_LOWER_BOUND: f64 = 1.02;

/// Baselines shorter than this make the rescale factor undefined.
pub const MIN_BASELINE: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MetricsError {
    #[error("trajectory lengths differ: reference has {gt} frames, generated has {gen}")]
    LengthMismatch { gt: usize, gen: usize },

    #[error("at least {needed} frames are required, got {got}")]
    TooFewFrames { needed: usize, got: usize },

    #[error("first-interval baseline too small to rescale (reference {gt:e}, generated {gen:e})")]
    DegenerateBaseline { gt: f64, gen: f64 },
}

/// Geodesic angle between two rotations, `arccos((tr(R_gen R_gtᵀ) − 1) / 2)`.
///
/// Evaluated as `atan2(sin θ, cos θ)` with `sin θ` taken from the skew part of
/// `R_gen R_gtᵀ`; plain `arccos` loses half the digits near 0 and π.
pub fn rotation_angle_between(gen: &nalgebra::Matrix3<f64>, gt: &nalgebra::Matrix3<f64>) -> f64 {
    let m = gen * gt.transpose();
    let cos = (m.trace() - 1.0) / 2.0;
    let sin = 0.5
        * nalgebra::Vector3::new(
            m[(2, 1)] - m[(1, 2)],
            m[(0, 2)] - m[(2, 0)],
            m[(1, 0)] - m[(0, 1)],
        )
        .norm();
    sin.atan2(cos.clamp(-1.0, 1.0))
}

fn check_lengths(gt: &Trajectory, gen: &Trajectory) -> Result<(), MetricsError> {
    if gt.len() != gen.len() {
        return Err(MetricsError::LengthMismatch {
            gt: gt.len(),
            gen: gen.len(),
        });
    }
    Ok(())
}

fn w2c(traj: &Trajectory) -> Vec<Extrinsics> {
    traj.poses()
        .iter()
        .map(|p| p.extrinsics.to_convention(Convention::WorldToCamera))
        .collect()
}

/// Per-frame and summed rotation error. Poses are compared as given (in
/// world-to-camera form); relativize first if the frames differ.
pub fn rot_err(gt: &Trajectory, gen: &Trajectory) -> Result<(f64, Vec<f64>), MetricsError> {
    check_lengths(gt, gen)?;
    let per_frame: Vec<f64> = w2c(gt)
        .iter()
        .zip(w2c(gen))
        .map(|(g, e)| rotation_angle_between(e.rotation(), g.rotation()))
        .collect();
    Ok((per_frame.iter().sum(), per_frame))
}

/// Per-frame and summed squared translation error of the world-to-camera
/// translation vectors.
pub fn trans_err(gt: &Trajectory, gen: &Trajectory) -> Result<(f64, Vec<f64>), MetricsError> {
    check_lengths(gt, gen)?;
    let per_frame: Vec<f64> = w2c(gt)
        .iter()
        .zip(w2c(gen))
        .map(|(g, e)| (g.translation() - e.translation()).norm_squared())
        .collect();
    Ok((per_frame.iter().sum(), per_frame))
}

/// Scales `gen`'s world-to-camera translations by
/// `‖t_gt[1]‖ / ‖t_gen[1]‖`. Both inputs should already be relativized.
/// The result is in world-to-camera form.
pub fn normalize_scale(
    gt: &Trajectory,
    gen: &Trajectory,
) -> Result<(Trajectory, f64), MetricsError> {
    check_lengths(gt, gen)?;
    if gt.len() < 2 {
        return Err(MetricsError::TooFewFrames {
            needed: 2,
            got: gt.len(),
        });
    }
    let gt_e = w2c(gt);
    let gen_e = w2c(gen);
    let gt_gap = (gt_e[1].translation() - gt_e[0].translation()).norm();
    let gen_gap = (gen_e[1].translation() - gen_e[0].translation()).norm();
    if !(gt_gap >= MIN_BASELINE && gen_gap >= MIN_BASELINE) {
        return Err(MetricsError::DegenerateBaseline {
            gt: gt_gap,
            gen: gen_gap,
        });
    }
    let factor = gt_gap / gen_gap;
    let scaled = gen_e
        .iter()
        .map(|e| {
            Extrinsics::new(
                *e.rotation(),
                e.translation() * factor,
                Convention::WorldToCamera,
            )
            .expect("rotation unchanged, translation finite")
        })
        .collect();
    Ok((
        gen.to_convention(Convention::WorldToCamera)
            .with_extrinsics(scaled),
        factor,
    ))
}

/// Result of [`evaluate`].
#[derive(Debug, Clone, PartialEq)]
pub struct AlignmentReport {
    pub rot_err_total: f64,
    pub trans_err_total: f64,
    /// Sum of unsquared distances, for comparison with tools that report
    /// plain L2.
    pub trans_err_unsquared_total: f64,
    pub per_frame_rot: Vec<f64>,
    pub per_frame_trans: Vec<f64>,
    pub per_frame_trans_unsquared: Vec<f64>,
    pub rescale_factor: f64,
    pub frames_compared: usize,
}

#[derive(Serialize)]
struct FrameJson {
    frame: usize,
    rot_err: f64,
    trans_err: f64,
    trans_err_unsquared: f64,
}

#[derive(Serialize)]
struct ReportJson {
    rot_err: f64,
    trans_err: f64,
    trans_err_unsquared: f64,
    rescale_factor: f64,
    frames_compared: usize,
    per_frame: Vec<FrameJson>,
}

impl AlignmentReport {
    pub fn to_json(&self) -> serde_json::Value {
        let per_frame = (0..self.frames_compared)
            .map(|i| FrameJson {
                frame: i,
                rot_err: self.per_frame_rot[i],
                trans_err: self.per_frame_trans[i],
                trans_err_unsquared: self.per_frame_trans_unsquared[i],
            })
            .collect();
        serde_json::to_value(ReportJson {
            rot_err: self.rot_err_total,
            trans_err: self.trans_err_total,
            trans_err_unsquared: self.trans_err_unsquared_total,
            rescale_factor: self.rescale_factor,
            frames_compared: self.frames_compared,
            per_frame,
        })
        .expect("report fields are plain numbers")
    }
}

/// Relativize both trajectories, rescale the generated one, then measure.
pub fn evaluate(gt: &Trajectory, gen: &Trajectory) -> Result<AlignmentReport, MetricsError> {
    check_lengths(gt, gen)?;
    let gt_rel = relativize(gt);
    let gen_rel = relativize(gen);
    let (gen_norm, rescale_factor) = normalize_scale(&gt_rel, &gen_rel)?;
    let (rot_err_total, per_frame_rot) = rot_err(&gt_rel, &gen_norm)?;
    let (trans_err_total, per_frame_trans) = trans_err(&gt_rel, &gen_norm)?;
    let per_frame_trans_unsquared: Vec<f64> = per_frame_trans.iter().map(|v| v.sqrt()).collect();
    Ok(AlignmentReport {
        rot_err_total,
        trans_err_total,
        trans_err_unsquared_total: per_frame_trans_unsquared.iter().sum(),
        per_frame_rot,
        per_frame_trans,
        per_frame_trans_unsquared,
        rescale_factor,
        frames_compared: gt.len(),
    })
}

/// Convenience for callers holding raw translation vectors.
pub fn squared_distance(a: &Vector3<f64>, b: &Vector3<f64>) -> f64 {
    (a - b).norm_squared()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{rotation_about_axis, CameraPose, Intrinsics};
    use std::f64::consts::FRAC_PI_2;

    fn traj(extr: Vec<Extrinsics>) -> Trajectory {
        let k = Intrinsics::new(1.0, 1.0, 0.5, 0.5).unwrap();
        Trajectory::new(
            extr.into_iter().map(|e| CameraPose::new(k, e)).collect(),
            4,
            4,
        )
        .unwrap()
    }

    fn w2c_e(r: nalgebra::Matrix3<f64>, t: Vector3<f64>) -> Extrinsics {
        Extrinsics::new(r, t, Convention::WorldToCamera).unwrap()
    }

    #[test]
    fn quarter_turn_is_half_pi() {
        let gt = traj(vec![Extrinsics::identity(Convention::WorldToCamera)]);
        let gen = traj(vec![w2c_e(
            rotation_about_axis(&Vector3::z(), FRAC_PI_2).unwrap(),
            Vector3::zeros(),
        )]);
        let (total, per) = rot_err(&gt, &gen).unwrap();
        assert!((total - FRAC_PI_2).abs() < 1e-9);
        assert_eq!(per.len(), 1);
    }

    #[test]
    fn three_four_five() {
        let gt = traj(vec![Extrinsics::identity(Convention::WorldToCamera)]);
        let gen = traj(vec![w2c_e(
            nalgebra::Matrix3::identity(),
            Vector3::new(3.0, 4.0, 0.0),
        )]);
        let (total, _) = trans_err(&gt, &gen).unwrap();
        assert_eq!(total, 25.0);
    }

    #[test]
    fn length_mismatch() {
        let a = traj(vec![Extrinsics::identity(Convention::WorldToCamera)]);
        let b = traj(vec![Extrinsics::identity(Convention::WorldToCamera); 2]);
        assert!(matches!(
            rot_err(&a, &b),
            Err(MetricsError::LengthMismatch { gt: 1, gen: 2 })
        ));
        assert!(matches!(
            evaluate(&a, &b),
            Err(MetricsError::LengthMismatch { .. })
        ));
    }

    #[test]
    fn rescale_uniform() {
        let gt = traj(vec![
            Extrinsics::identity(Convention::WorldToCamera),
            w2c_e(nalgebra::Matrix3::identity(), Vector3::new(1.0, 0.0, 0.0)),
            w2c_e(nalgebra::Matrix3::identity(), Vector3::new(1.5, 0.5, 0.0)),
        ]);
        let gen = traj(vec![
            Extrinsics::identity(Convention::WorldToCamera),
            w2c_e(nalgebra::Matrix3::identity(), Vector3::new(2.0, 0.0, 0.0)),
            w2c_e(nalgebra::Matrix3::identity(), Vector3::new(3.0, 1.0, 0.0)),
        ]);
        let (norm, factor) = normalize_scale(&gt, &gen).unwrap();
        assert_eq!(factor, 0.5);
        for (a, b) in gt.poses().iter().zip(norm.poses()) {
            assert!((a.extrinsics.translation() - b.extrinsics.translation()).amax() < 1e-9);
        }
        assert_eq!(normalize_scale(&gt, &gt).unwrap().1, 1.0);
    }

    #[test]
    fn static_start_is_degenerate() {
        let gt = traj(vec![Extrinsics::identity(Convention::WorldToCamera); 3]);
        assert!(matches!(
            normalize_scale(&gt, &gt),
            Err(MetricsError::DegenerateBaseline { .. })
        ));
        let one = traj(vec![Extrinsics::identity(Convention::WorldToCamera)]);
        assert!(matches!(
            normalize_scale(&one, &one),
            Err(MetricsError::TooFewFrames { .. })
        ));
    }

    #[test]
    fn noisy_trace_does_not_nan() {
        let mut r = nalgebra::Matrix3::identity();
        r[(0, 0)] = 1.0 + 1e-15;
        assert_eq!(
            rotation_angle_between(&r, &nalgebra::Matrix3::identity()),
            0.0
        );
        let flip = rotation_about_axis(&Vector3::x(), std::f64::consts::PI).unwrap();
        let mut noisy = flip;
        noisy[(1, 1)] -= 1e-15;
        noisy[(2, 2)] -= 1e-15;
        assert!(rotation_angle_between(&noisy, &nalgebra::Matrix3::identity()).is_finite());
    }

    #[test]
    fn report_json_shape() {
        let gt = traj(vec![
            Extrinsics::identity(Convention::WorldToCamera),
            w2c_e(nalgebra::Matrix3::identity(), Vector3::new(1.0, 0.0, 0.0)),
        ]);
        let report = evaluate(&gt, &gt).unwrap();
        let json = report.to_json();
        assert_eq!(json["rot_err"], 0.0);
        assert_eq!(json["trans_err"], 0.0);
        assert_eq!(json["rescale_factor"], 1.0);
        assert_eq!(json["per_frame"].as_array().unwrap().len(), 2);
        assert!(json.get("trans_err_unsquared").is_some());
    }
}
