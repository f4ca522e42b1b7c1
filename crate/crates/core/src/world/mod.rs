//! Deterministic 2D world: maps, kinematics, range sensors and fault injection.

pub mod depth;
pub mod fault;
pub mod lidar;
pub mod map;
pub mod sim;

use thiserror::Error;

pub use depth::{synth_pointcloud, CameraParams, PointCloud};
pub use fault::{fault_active, FaultKind, FaultSpec};
pub use lidar::{cast_ray, raycast_scan, LaserScan, ScanParams};
pub use map::{load_map, GridMap, MapError};
pub use sim::{footprint_collides, step, SimConfig, SimState};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum WorldError {
    #[error("pose is outside the map")]
    PoseOutOfBounds,
    #[error("dt must be positive, got {0}")]
    NonPositiveDt(f64),
    #[error("dt {0} exceeds the 0.5 s step limit")]
    DtTooLarge(f64),
    #[error("velocity command is not finite")]
    NonFiniteCommand,
    #[error("invalid scan parameters")]
    InvalidScanParams,
    #[error("invalid camera parameters")]
    InvalidCameraParams,
    #[error("fault interval [{t_start}, {t_end}) is empty or not finite")]
    BadFaultInterval { t_start: f64, t_end: f64 },
}
