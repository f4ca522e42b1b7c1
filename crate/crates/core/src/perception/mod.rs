//! Cognitive data products derived from the raw sensors.

pub mod costmap;
pub mod edt;
pub mod legs;
pub mod mcl;
pub mod voxel;

use thiserror::Error;

pub use costmap::{update_costmap, CostMap};
pub use legs::{detect_humans, HumanDetection, LegParams};
pub use mcl::{estimate_pose, mcl_step, LikelihoodField, MclConfig, Particle, ParticleSet};
pub use voxel::voxel_downsample;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PerceptionError {
    #[error("particle set is empty")]
    EmptyBelief,
    #[error("every particle weight is zero; reverted to uniform weights")]
    AllZeroWeights { recovered: ParticleSet },
    #[error("invalid motion noise parameters")]
    BadNoise,
    #[error("pose is outside the map")]
    PoseOutOfBounds,
    #[error("voxel leaf must be positive, got {0}")]
    NonPositiveLeaf(f64),
    #[error("cell count does not match the map geometry")]
    GeometryMismatch,
}
