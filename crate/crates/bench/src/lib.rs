//! Fixtures shared by the pipeline benchmarks.

use camtraj_core::geometry::{Intrinsics, Trajectory};
use camtraj_core::nalgebra::Vector3;
use camtraj_core::synth::{Motion, SynthPlan};

/// A leftward pan over `frames` frames at `width × height`.
pub fn pan_trajectory(frames: usize, width: usize, height: usize) -> Trajectory {
    let f = 0.5 * width as f64;
    let plan = SynthPlan {
        frames,
        width,
        height,
        intrinsics: Intrinsics::new(f, f, 0.5 * width as f64, 0.5 * height as f64)
            .expect("positive focal length"),
        motions: vec![Motion::Pan {
            direction: -Vector3::x(),
            interval: 0.1,
        }],
    };
    plan.build().expect("valid plan")
}
