//! Marker encoding: every data product as colored glyphs for a viewer.
//!
//! Scan hits are red dots, particles pink, the planned path and detected
//! people yellow; cost-map cells run green to red with probability. The
//! turning-signal arrow is expressed in the robot frame.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::Pose2D;
use crate::perception::{CostMap, HumanDetection, ParticleSet};
use crate::planning::{Path, Signal, TurnSignal};
use crate::world::{LaserScan, PointCloud};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum VizError {
    #[error("probability {0} is outside [0, 1]")]
    OutOfRange(f64),
    #[error("path is empty")]
    EmptyPath,
    #[error("spacing must be positive, got {0}")]
    NonPositiveSpacing(f64),
}

/// RGBA, each component in `[0, 1]`. On the wire: `[r, g, b, a]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; 4]", into = "[f64; 4]")]
pub struct Color {
    pub r: f64,
    pub g: f64,
    pub b: f64,
    pub a: f64,
}

impl Color {
    /// Components are clamped; NaN becomes 0.
    pub fn new(r: f64, g: f64, b: f64, a: f64) -> Self {
        let c = |v: f64| if v.is_nan() { 0.0 } else { v.clamp(0.0, 1.0) };
        Self {
            r: c(r),
            g: c(g),
            b: c(b),
            a: c(a),
        }
    }
}

impl From<[f64; 4]> for Color {
    fn from(v: [f64; 4]) -> Self {
        Color::new(v[0], v[1], v[2], v[3])
    }
}

impl From<Color> for [f64; 4] {
    fn from(c: Color) -> Self {
        [c.r, c.g, c.b, c.a]
    }
}

pub const RED: Color = Color { r: 1.0, g: 0.0, b: 0.0, a: 1.0 };
pub const PINK: Color = Color { r: 1.0, g: 0.4, b: 0.7, a: 1.0 };
pub const YELLOW: Color = Color { r: 1.0, g: 1.0, b: 0.0, a: 1.0 };
pub const AMBER: Color = Color { r: 1.0, g: 0.6, b: 0.0, a: 1.0 };
pub const CLOUD_BLUE: Color = Color { r: 0.3, g: 0.7, b: 1.0, a: 1.0 };

pub const SCAN_DOT_SCALE: f64 = 0.05;
pub const PATH_DOT_SCALE: f64 = 0.08;
pub const AVATAR_SCALE: f64 = 0.5;
pub const ARROW_SCALE: f64 = 0.4;
pub const POINT_SCALE: f64 = 0.03;
pub const PARTICLE_MIN_SCALE: f64 = 0.02;
pub const PARTICLE_SCALE: f64 = 0.05;
pub const FLASH_HZ: f64 = 2.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Layer {
    Scan,
    Particles,
    Humans,
    Costmap,
    Path,
    Signal,
    Pointcloud,
}

impl Layer {
    pub const ALL: [Layer; 7] = [
        Layer::Scan,
        Layer::Particles,
        Layer::Humans,
        Layer::Costmap,
        Layer::Path,
        Layer::Signal,
        Layer::Pointcloud,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Layer::Scan => "scan",
            Layer::Particles => "particles",
            Layer::Humans => "humans",
            Layer::Costmap => "costmap",
            Layer::Path => "path",
            Layer::Signal => "signal",
            Layer::Pointcloud => "pointcloud",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Kind {
    Dot,
    Cell,
    Arrow,
    Avatar,
    Point3d,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Marker {
    pub id: u32,
    pub kind: Kind,
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub yaw: f64,
    pub scale: f64,
    pub color: Color,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub flash_hz: Option<f64>,
}

impl Marker {
    fn at(id: usize, kind: Kind, x: f64, y: f64, scale: f64, color: Color) -> Self {
        Self {
            id: id as u32,
            kind,
            x,
            y,
            z: 0.0,
            yaw: 0.0,
            scale,
            color,
            flash_hz: None,
        }
    }
}

/// One layer's markers at one instant; the unit published on `/markers/<layer>`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarkerFrame {
    pub stamp: f64,
    pub layer: Layer,
    pub markers: Vec<Marker>,
}

/// Green (clear) to red (occupied): `(p, 1 - p, 0, 0.8)`.
pub fn color_of(p: f64) -> Result<Color, VizError> {
    if !(0.0..=1.0).contains(&p) {
        return Err(VizError::OutOfRange(p));
    }
    Ok(Color::new(p, 1.0 - p, 0.0, 0.8))
}

/// A red dot at each returned beam's endpoint, as seen from `pose`.
pub fn encode_scan(scan: &LaserScan, pose: &Pose2D) -> Vec<Marker> {
    let inc = scan.angle_increment();
    scan.ranges
        .iter()
        .enumerate()
        .filter_map(|(i, r)| r.map(|r| (i, r)))
        .enumerate()
        .map(|(id, (i, r))| {
            let a = pose.theta + scan.angle_min + i as f64 * inc;
            Marker::at(id, Kind::Dot, pose.x + r * a.cos(), pose.y + r * a.sin(), SCAN_DOT_SCALE, RED)
        })
        .collect()
}

/// A pink dot per particle, sized by weight relative to uniform.
pub fn encode_particles(belief: &ParticleSet) -> Vec<Marker> {
    let n = belief.len() as f64;
    belief
        .particles
        .iter()
        .enumerate()
        .map(|(id, p)| {
            let scale = (PARTICLE_SCALE * p.weight * n).max(PARTICLE_MIN_SCALE);
            Marker {
                yaw: p.pose.theta,
                ..Marker::at(id, Kind::Dot, p.pose.x, p.pose.y, scale, PINK)
            }
        })
        .collect()
}

fn cost_cell(id: usize, cost: &CostMap, cx: usize, cy: usize) -> Marker {
    let geom = cost.geometry();
    let (x, y) = geom.cell_center(cx, cy);
    let p = cost.get(cx, cy);
    // cells are always within [0, 1]
    let color = color_of(p).unwrap_or(RED);
    Marker {
        yaw: cost.origin().theta,
        ..Marker::at(id, Kind::Cell, x, y, cost.resolution(), color)
    }
}

/// A colored cell marker for every cell with `p > 0` and `p >= emit_threshold`.
pub fn encode_costmap(cost: &CostMap, emit_threshold: f64) -> Vec<Marker> {
    let mut out = Vec::new();
    for cy in 0..cost.height() {
        for cx in 0..cost.width() {
            let p = cost.get(cx, cy);
            if p > 0.0 && p >= emit_threshold {
                out.push(cost_cell(out.len(), cost, cx, cy));
            }
        }
    }
    out
}

/// Like [`encode_costmap`], plus a sample of the clear cells near the robot:
/// every other cell (checkerboard) below the threshold within `radius` of
/// `center`, so the viewer also sees where the way is free.
pub fn encode_costmap_with_clear(cost: &CostMap, emit_threshold: f64, center: &Pose2D, radius: f64) -> Vec<Marker> {
    let mut out = encode_costmap(cost, emit_threshold);
    let geom = cost.geometry();
    for cy in 0..cost.height() {
        for cx in 0..cost.width() {
            let p = cost.get(cx, cy);
            if (cx + cy) % 2 != 0 || (p > 0.0 && p >= emit_threshold) {
                continue;
            }
            let (x, y) = geom.cell_center(cx, cy);
            if center.distance_to(x, y) <= radius {
                out.push(cost_cell(out.len(), cost, cx, cy));
            }
        }
    }
    out
}

/// Yellow dots along the path every `spacing` meters of arc length, starting
/// at the first pose.
pub fn encode_path(path: &Path, spacing: f64) -> Result<Vec<Marker>, VizError> {
    if !(spacing > 0.0) {
        return Err(VizError::NonPositiveSpacing(spacing));
    }
    let poses = &path.poses;
    let Some(first) = poses.first() else {
        return Err(VizError::EmptyPath);
    };
    let total = path.length();
    let count = (total / spacing + 1e-9).floor() as usize + 1;
    let mut out = Vec::with_capacity(count);
    let mut seg = 0;
    let mut seg_start = 0.0;
    for k in 0..count {
        let s = k as f64 * spacing;
        while seg + 1 < poses.len() {
            let len = poses[seg].distance_to(poses[seg + 1].x, poses[seg + 1].y);
            if s <= seg_start + len {
                break;
            }
            seg_start += len;
            seg += 1;
        }
        let (x, y, yaw) = if seg + 1 < poses.len() {
            let (a, b) = (poses[seg], poses[seg + 1]);
            let len = a.distance_to(b.x, b.y);
            let t = if len > 0.0 { ((s - seg_start) / len).clamp(0.0, 1.0) } else { 0.0 };
            (a.x + t * (b.x - a.x), a.y + t * (b.y - a.y), a.theta)
        } else {
            let last = poses[poses.len() - 1];
            if poses.len() == 1 {
                (first.x, first.y, first.theta)
            } else {
                (last.x, last.y, last.theta)
            }
        };
        out.push(Marker {
            yaw,
            ..Marker::at(k, Kind::Dot, x, y, PATH_DOT_SCALE, YELLOW)
        });
    }
    Ok(out)
}

/// A yellow avatar per detected person.
pub fn encode_humans(dets: &[HumanDetection]) -> Vec<Marker> {
    dets.iter()
        .enumerate()
        .map(|(id, d)| Marker::at(id, Kind::Avatar, d.x, d.y, AVATAR_SCALE, YELLOW))
        .collect()
}

/// A flashing arrow pointing left or right of the robot (robot frame); nothing
/// when going straight.
pub fn encode_signal(sig: &TurnSignal) -> Vec<Marker> {
    let yaw = match sig.value {
        Signal::Left => std::f64::consts::FRAC_PI_2,
        Signal::Right => -std::f64::consts::FRAC_PI_2,
        Signal::Straight => return Vec::new(),
    };
    vec![Marker {
        yaw,
        flash_hz: Some(FLASH_HZ),
        ..Marker::at(0, Kind::Arrow, 0.0, 0.0, ARROW_SCALE, AMBER)
    }]
}

/// A 3D point marker per cloud point.
pub fn encode_pointcloud(cloud: &PointCloud) -> Vec<Marker> {
    cloud
        .points
        .iter()
        .enumerate()
        .map(|(id, p)| Marker {
            z: p[2],
            ..Marker::at(id, Kind::Point3d, p[0], p[1], POINT_SCALE, CLOUD_BLUE)
        })
        .collect()
}
