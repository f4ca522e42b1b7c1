//! Ray-cast range sensor over a [`GridMap`].

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::map::GridMap;
use super::WorldError;
use crate::geometry::Pose2D;

/// Beam layout of the simulated scanner.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScanParams {
    pub angle_min: f64,
    pub angle_max: f64,
    pub beam_count: usize,
    pub range_min: f64,
    pub range_max: f64,
}

impl Default for ScanParams {
    /// 360 one-degree beams covering `(-PI, PI]`, 0.15 m to 12 m.
    fn default() -> Self {
        let beam_count = 360;
        Self {
            angle_min: -PI + 2.0 * PI / beam_count as f64,
            angle_max: PI,
            beam_count,
            range_min: 0.15,
            range_max: 12.0,
        }
    }
}

impl ScanParams {
    pub fn validate(&self) -> Result<(), WorldError> {
        let ok = self.beam_count >= 2
            && self.angle_min.is_finite()
            && self.angle_max.is_finite()
            && self.angle_max > self.angle_min
            && self.range_min >= 0.0
            && self.range_max.is_finite()
            && self.range_min < self.range_max;
        if ok {
            Ok(())
        } else {
            Err(WorldError::InvalidScanParams)
        }
    }

    pub fn angle_increment(&self) -> f64 {
        (self.angle_max - self.angle_min) / (self.beam_count - 1) as f64
    }

    /// Beam angle relative to the sensor heading.
    pub fn beam_angle(&self, i: usize) -> f64 {
        self.angle_min + i as f64 * self.angle_increment()
    }
}

/// One sweep. `None` marks a beam with no return inside `[range_min, range_max]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LaserScan {
    pub stamp: f64,
    pub pose: Pose2D,
    pub angle_min: f64,
    pub angle_max: f64,
    pub range_min: f64,
    pub range_max: f64,
    pub ranges: Vec<Option<f64>>,
}

impl LaserScan {
    pub fn params(&self) -> ScanParams {
        ScanParams {
            angle_min: self.angle_min,
            angle_max: self.angle_max,
            beam_count: self.ranges.len(),
            range_min: self.range_min,
            range_max: self.range_max,
        }
    }

    /// A scan where every beam is `None`.
    pub fn blank(stamp: f64, pose: Pose2D, params: &ScanParams) -> Self {
        Self {
            stamp,
            pose,
            angle_min: params.angle_min,
            angle_max: params.angle_max,
            range_min: params.range_min,
            range_max: params.range_max,
            ranges: vec![None; params.beam_count],
        }
    }

    pub fn angle_increment(&self) -> f64 {
        if self.ranges.len() < 2 {
            return 0.0;
        }
        (self.angle_max - self.angle_min) / (self.ranges.len() - 1) as f64
    }

    pub fn return_count(&self) -> usize {
        self.ranges.iter().filter(|r| r.is_some()).count()
    }

    /// World-frame hit points as `(beam index, x, y)`.
    pub fn hit_points(&self) -> impl Iterator<Item = (usize, f64, f64)> + '_ {
        let inc = self.angle_increment();
        self.ranges.iter().enumerate().filter_map(move |(i, r)| {
            r.map(|r| {
                let a = self.pose.theta + self.angle_min + i as f64 * inc;
                (i, self.pose.x + r * a.cos(), self.pose.y + r * a.sin())
            })
        })
    }
}

/// Distance along a ray to the first occupied cell, via exact grid traversal.
///
/// Coordinates are in the map-local frame. Leaving the grid counts as no hit.
pub(crate) fn cast_ray_local(map: &GridMap, ox: f64, oy: f64, angle: f64, max_range: f64) -> Option<f64> {
    let res = map.resolution();
    let (dy, dx) = angle.sin_cos();
    let mut ix = (ox / res).floor() as i64;
    let mut iy = (oy / res).floor() as i64;
    match map.occupied_at(ix, iy) {
        None => return None,
        Some(true) => return Some(0.0),
        Some(false) => {}
    }
    let step_x: i64 = if dx > 0.0 { 1 } else { -1 };
    let step_y: i64 = if dy > 0.0 { 1 } else { -1 };
    let boundary_t = |i: i64, step: i64, o: f64, d: f64| -> f64 {
        if d == 0.0 {
            f64::INFINITY
        } else {
            let edge = if step > 0 { i + 1 } else { i } as f64 * res;
            ((edge - o) / d).max(0.0)
        }
    };
    loop {
        let tx = boundary_t(ix, step_x, ox, dx);
        let ty = boundary_t(iy, step_y, oy, dy);
        let t = if tx < ty {
            ix += step_x;
            tx
        } else {
            iy += step_y;
            ty
        };
        if t > max_range {
            return None;
        }
        match map.occupied_at(ix, iy) {
            None => return None,
            Some(true) => return Some(t),
            Some(false) => {}
        }
    }
}

/// Range to the first occupied cell from a world pose along a world heading.
pub fn cast_ray(map: &GridMap, x: f64, y: f64, heading: f64, max_range: f64) -> Option<f64> {
    let (lx, ly) = map.world_to_local(x, y);
    cast_ray_local(map, lx, ly, map.world_angle_to_local(heading), max_range)
}

/// Simulates one sweep from `pose`. With `fault_active` every beam reads no return.
pub fn raycast_scan(
    map: &GridMap,
    pose: &Pose2D,
    params: &ScanParams,
    fault_active: bool,
    stamp: f64,
) -> Result<LaserScan, WorldError> {
    params.validate()?;
    if !pose.is_finite() || !map.contains(pose.x, pose.y) {
        return Err(WorldError::PoseOutOfBounds);
    }
    let mut scan = LaserScan::blank(stamp, *pose, params);
    if fault_active {
        return Ok(scan);
    }
    let (lx, ly) = map.world_to_local(pose.x, pose.y);
    let heading = map.world_angle_to_local(pose.theta);
    for (i, slot) in scan.ranges.iter_mut().enumerate() {
        let a = heading + params.beam_angle(i);
        *slot = cast_ray_local(map, lx, ly, a, params.range_max)
            .filter(|r| *r >= params.range_min && *r <= params.range_max);
    }
    Ok(scan)
}
