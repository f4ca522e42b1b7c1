//! Synthetic depth camera.
//!
//! The world is planar, so each forward ray that hits a wall is extruded into
//! a short vertical column of points at fixed heights.

use serde::{Deserialize, Serialize};

use super::lidar::cast_ray;
use super::map::GridMap;
use super::WorldError;
use crate::geometry::Pose2D;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CameraParams {
    /// Horizontal field of view, radians, strictly below PI.
    pub fov: f64,
    /// Number of rays across the field of view (>= 2, endpoints included).
    pub ray_count: usize,
    /// Heights at which every hit is replicated.
    pub heights: Vec<f64>,
    pub range_max: f64,
}

impl Default for CameraParams {
    fn default() -> Self {
        Self {
            fov: 60f64.to_radians(),
            ray_count: 64,
            heights: vec![0.1, 0.3, 0.5, 0.7],
            range_max: 4.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct PointCloud {
    pub stamp: f64,
    pub points: Vec<[f64; 3]>,
}

pub fn synth_pointcloud(
    map: &GridMap,
    pose: &Pose2D,
    cam: &CameraParams,
    stamp: f64,
) -> Result<PointCloud, WorldError> {
    let valid = cam.fov.is_finite()
        && cam.fov >= 0.0
        && cam.fov < std::f64::consts::PI
        && cam.ray_count >= 2
        && cam.range_max > 0.0
        && cam.heights.iter().all(|h| h.is_finite());
    if !valid {
        return Err(WorldError::InvalidCameraParams);
    }
    if !pose.is_finite() || !map.contains(pose.x, pose.y) {
        return Err(WorldError::PoseOutOfBounds);
    }
    let step = cam.fov / (cam.ray_count - 1) as f64;
    let mut points = Vec::new();
    for i in 0..cam.ray_count {
        let a = pose.theta - cam.fov / 2.0 + i as f64 * step;
        if let Some(r) = cast_ray(map, pose.x, pose.y, a, cam.range_max) {
            let (x, y) = (pose.x + r * a.cos(), pose.y + r * a.sin());
            points.extend(cam.heights.iter().map(|z| [x, y, *z]));
        }
    }
    Ok(PointCloud { stamp, points })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn wall_ahead() -> GridMap {
        let mut m = GridMap::empty(50, 50, 0.1, Pose2D::default());
        for cy in 0..50 {
            m.set_occupied(40, cy, true);
        }
        m
    }

    #[test]
    fn empty_map_gives_no_points() {
        let m = GridMap::empty(50, 50, 0.1, Pose2D::default());
        let pc = synth_pointcloud(&m, &Pose2D::new(2.5, 2.5, 0.0), &CameraParams::default(), 0.0).unwrap();
        assert!(pc.points.is_empty());
    }

    #[test]
    fn wall_points_lie_on_wall_line() {
        let m = wall_ahead();
        let cam = CameraParams::default();
        let pc = synth_pointcloud(&m, &Pose2D::new(2.5, 2.5, 0.0), &cam, 0.0).unwrap();
        assert_eq!(pc.points.len(), cam.ray_count * cam.heights.len());
        for p in &pc.points {
            assert!((p[0] - 4.0).abs() < 1e-9, "{p:?}");
            assert!(cam.heights.contains(&p[2]));
        }
    }

    #[test]
    fn narrow_fov_two_rays() {
        let m = wall_ahead();
        let cam = CameraParams {
            fov: 1e-6,
            ray_count: 2,
            ..CameraParams::default()
        };
        let pc = synth_pointcloud(&m, &Pose2D::new(2.5, 2.5, 0.0), &cam, 0.0).unwrap();
        assert!(pc.points.len() <= 2 * cam.heights.len());
    }

    #[test]
    fn rejects_wide_fov() {
        let m = wall_ahead();
        let cam = CameraParams {
            fov: std::f64::consts::PI,
            ..CameraParams::default()
        };
        assert_eq!(
            synth_pointcloud(&m, &Pose2D::new(2.5, 2.5, 0.0), &cam, 0.0),
            Err(WorldError::InvalidCameraParams)
        );
    }
}
