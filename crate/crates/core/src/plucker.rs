//! Per-pixel Plücker ray embeddings.
//!
//! For pixel `(u, v)` the world-space ray direction is
//! `d = normalize(R_c2w · K⁻¹ · [u, v, 1]ᵀ)` and the embedding is the
//! 6-vector `(o × d, d)`, where `o` is the camera center in world space.
//! Poses in either convention are accepted; world-to-camera extrinsics are
//! inverted before use.
//!
//! Maps are computed in `f64` and stored as `f32`, channel-major
//! (`6 × h × w`), channels ordered `m_x, m_y, m_z, d_x, d_y, d_z`.

use nalgebra::{Matrix3, Vector3};
use rayon::prelude::*;

use crate::geometry::{CameraPose, Convention, Trajectory};
use crate::tensor::Tensor;

/// Channels per pixel.
pub const CHANNELS: usize = 6;

/// Where a ray crosses its pixel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PixelOrigin {
    /// Through `(u + 0.5, v + 0.5)`.
    #[default]
    Center,
    /// Through `(u, v)`.
    Corner,
}

impl PixelOrigin {
    pub fn offset(self) -> f64 {
        match self {
            PixelOrigin::Center => 0.5,
            PixelOrigin::Corner => 0.0,
        }
    }
}

/// World-space position of the camera.
pub fn camera_center(pose: &CameraPose) -> Vector3<f64> {
    pose.extrinsics.camera_center()
}

fn c2w_rotation(pose: &CameraPose) -> Matrix3<f64> {
    *pose
        .extrinsics
        .to_convention(Convention::CameraToWorld)
        .rotation()
}

/// Unit world-space direction from the camera center through pixel `(u, v)`.
/// `u` and `v` may be fractional; `origin` adds the half-pixel offset.
pub fn ray_direction(pose: &CameraPose, u: f64, v: f64, origin: PixelOrigin) -> Vector3<f64> {
    let off = origin.offset();
    let cam = pose.intrinsics.unproject(u + off, v + off);
    (c2w_rotation(pose) * cam).normalize()
}

/// The 6-vector `(o × d, d)` for a single pixel.
pub fn plucker_at(pose: &CameraPose, u: f64, v: f64, origin: PixelOrigin) -> [f64; 6] {
    let o = camera_center(pose);
    let d = ray_direction(pose, u, v, origin);
    let m = o.cross(&d);
    [m.x, m.y, m.z, d.x, d.y, d.z]
}

/// Plücker embedding of one frame, shape `6 × h × w`.
#[derive(Debug, Clone, PartialEq)]
pub struct PluckerMap {
    data: Tensor,
}

impl PluckerMap {
    pub fn height(&self) -> usize {
        self.data.shape()[1]
    }

    pub fn width(&self) -> usize {
        self.data.shape()[2]
    }

    pub fn tensor(&self) -> &Tensor {
        &self.data
    }

    pub fn into_tensor(self) -> Tensor {
        self.data
    }

    /// The six channel values at pixel `(u, v)`.
    pub fn pixel(&self, u: usize, v: usize) -> [f32; 6] {
        let plane = self.height() * self.width();
        let at = v * self.width() + u;
        std::array::from_fn(|c| self.data.data()[c * plane + at])
    }
}

/// Plücker embeddings of a trajectory, shape `n × 6 × h × w`.
#[derive(Debug, Clone, PartialEq)]
pub struct PluckerSequence {
    data: Tensor,
}

impl PluckerSequence {
    pub fn frames(&self) -> usize {
        self.data.shape()[0]
    }

    pub fn height(&self) -> usize {
        self.data.shape()[2]
    }

    pub fn width(&self) -> usize {
        self.data.shape()[3]
    }

    pub fn tensor(&self) -> &Tensor {
        &self.data
    }

    pub fn into_tensor(self) -> Tensor {
        self.data
    }

    /// Flat `6 × h × w` slice of frame `i`.
    pub fn frame(&self, i: usize) -> &[f32] {
        let len = CHANNELS * self.height() * self.width();
        &self.data.data()[i * len..(i + 1) * len]
    }
}

fn fill_map(pose: &CameraPose, width: usize, height: usize, origin: PixelOrigin, out: &mut [f32]) {
    let plane = width * height;
    debug_assert_eq!(out.len(), CHANNELS * plane);
    let rot = c2w_rotation(pose);
    let intr = pose.intrinsics;
    let o = camera_center(pose);
    let off = origin.offset();
    for v in 0..height {
        let pv = v as f64 + off;
        for u in 0..width {
            let pu = u as f64 + off;
            let d = (rot * intr.unproject(pu, pv)).normalize();
            let moment = o.cross(&d);
            let at = v * width + u;
            out[at] = moment.x as f32;
            out[plane + at] = moment.y as f32;
            out[2 * plane + at] = moment.z as f32;
            out[3 * plane + at] = d.x as f32;
            out[4 * plane + at] = d.y as f32;
            out[5 * plane + at] = d.z as f32;
        }
    }
}

/// Embedding of a single pose over a `width × height` image.
pub fn plucker_map(
    pose: &CameraPose,
    width: usize,
    height: usize,
    origin: PixelOrigin,
) -> PluckerMap {
    let mut data = Tensor::zeros(vec![CHANNELS, height, width]);
    fill_map(pose, width, height, origin, data.data_mut());
    PluckerMap { data }
}

/// Embeddings for every frame of `traj`; frames are computed in parallel.
pub fn plucker_sequence(traj: &Trajectory, origin: PixelOrigin) -> PluckerSequence {
    let (w, h) = (traj.width(), traj.height());
    let mut data = Tensor::zeros(vec![traj.len(), CHANNELS, h, w]);
    let frame_len = CHANNELS * w * h;
    if frame_len > 0 {
        data.data_mut()
            .par_chunks_mut(frame_len)
            .zip(traj.poses().par_iter())
            .for_each(|(out, pose)| fill_map(pose, w, h, origin, out));
    }
    PluckerSequence { data }
}
