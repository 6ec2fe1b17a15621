//! Camera-trajectory conditioning toolkit: pinhole geometry, pose files,
//! Plücker ray embeddings, trajectory synthesis, pose-alignment metrics, a
//! forward-only camera encoder and NPY tensor export.

pub use nalgebra;

pub mod encoder;
pub mod geometry;
pub mod metrics;
pub mod npy;
pub mod plucker;
pub mod pose_io;
pub mod synth;
pub mod tensor;

pub use encoder::{
    encoder_forward, fuse, shape_schedule, CameraEncoder, EncoderConfig, EncoderError, FeatureMap,
    MultiScaleCameraFeatures,
};
pub use geometry::{
    relativize, CameraPose, Convention, Extrinsics, GeometryError, Intrinsics, Trajectory,
};
pub use metrics::{evaluate, AlignmentReport, MetricsError};
pub use npy::{read_npy, write_npy, NpyError};
pub use plucker::{plucker_map, plucker_sequence, PixelOrigin, PluckerMap, PluckerSequence};
pub use pose_io::{PoseFile, PoseIoError, PoseRecord};
pub use synth::{Motion, SynthError, SynthPlan};
pub use tensor::{Tensor, TensorError};
