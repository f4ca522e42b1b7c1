//! Occupancy-probability cost map: the static map fused with live scan hits,
//! inflated with a linear decay.

use super::edt::distance_transform;
use super::PerceptionError;
use crate::geometry::Pose2D;
use crate::world::{GridMap, LaserScan};

/// Scan endpoints lie on a cell boundary; push them this far along the beam
/// so they land inside the cell that stopped the ray.
pub const HIT_EPSILON: f64 = 1e-6;

/// Occupancy probability per cell, same geometry as the source [`GridMap`].
#[derive(Debug, Clone, PartialEq)]
pub struct CostMap {
    width: usize,
    height: usize,
    resolution: f64,
    origin: Pose2D,
    cells: Vec<f64>,
}

impl CostMap {
    /// All-zero cost map over a grid's geometry.
    pub fn zeros_like(map: &GridMap) -> Self {
        Self {
            width: map.width(),
            height: map.height(),
            resolution: map.resolution(),
            origin: map.origin(),
            cells: vec![0.0; map.width() * map.height()],
        }
    }

    /// Builds from raw probabilities; values are clamped into `[0, 1]`.
    pub fn from_cells(map: &GridMap, cells: Vec<f64>) -> Result<Self, PerceptionError> {
        if cells.len() != map.width() * map.height() {
            return Err(PerceptionError::GeometryMismatch);
        }
        let cells = cells
            .into_iter()
            .map(|p| if p.is_nan() { 1.0 } else { p.clamp(0.0, 1.0) })
            .collect();
        Ok(Self {
            cells,
            ..Self::zeros_like(map)
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn resolution(&self) -> f64 {
        self.resolution
    }

    pub fn origin(&self) -> Pose2D {
        self.origin
    }

    pub fn cells(&self) -> &[f64] {
        &self.cells
    }

    pub fn get(&self, cx: usize, cy: usize) -> f64 {
        self.cells[cy * self.width + cx]
    }

    pub fn set(&mut self, cx: usize, cy: usize, p: f64) {
        self.cells[cy * self.width + cx] = p.clamp(0.0, 1.0);
    }

    /// Empty grid with this cost map's geometry, for coordinate transforms.
    pub fn geometry(&self) -> GridMap {
        GridMap::empty(self.width, self.height, self.resolution, self.origin)
    }

    /// Reflection across the world x-axis.
    pub fn mirrored(&self) -> CostMap {
        let g = self.geometry().mirrored();
        let mut cells = vec![0.0; self.cells.len()];
        for cy in 0..self.height {
            let src = (self.height - 1 - cy) * self.width;
            cells[cy * self.width..(cy + 1) * self.width].copy_from_slice(&self.cells[src..src + self.width]);
        }
        CostMap {
            origin: g.origin(),
            cells,
            ..self.clone()
        }
    }
}

/// Cells a scan's returns fall into, as a source mask over `map`'s grid.
pub fn scan_hit_cells(map: &GridMap, scan: &LaserScan) -> Vec<bool> {
    let mut mask = vec![false; map.width() * map.height()];
    let inc = scan.angle_increment();
    for (i, r) in scan.ranges.iter().enumerate() {
        let Some(r) = r else { continue };
        let a = scan.pose.theta + scan.angle_min + i as f64 * inc;
        let d = r + HIT_EPSILON;
        if let Some((cx, cy)) = map.cell_of(scan.pose.x + d * a.cos(), scan.pose.y + d * a.sin()) {
            mask[map.index(cx, cy)] = true;
        }
    }
    mask
}

/// Static obstacles and scan hits get `p = 1`; other cells decay linearly with
/// the centre-to-centre distance `d` to the nearest such cell,
/// `p = max(0, 1 - d / inflation_radius)`.
pub fn update_costmap(
    static_map: &GridMap,
    scan: &LaserScan,
    robot_pose: &Pose2D,
    inflation_radius: f64,
) -> Result<CostMap, PerceptionError> {
    if !robot_pose.is_finite() || !static_map.contains(robot_pose.x, robot_pose.y) {
        return Err(PerceptionError::PoseOutOfBounds);
    }
    let mut sources = scan_hit_cells(static_map, scan);
    for (s, occ) in sources.iter_mut().zip(static_map.cells()) {
        *s |= *occ;
    }
    let res = static_map.resolution();
    let dist = distance_transform(static_map.width(), static_map.height(), &sources);
    let cells = dist
        .into_iter()
        .map(|d_cells| {
            if d_cells == 0.0 {
                1.0
            } else if inflation_radius > 0.0 && d_cells.is_finite() {
                (1.0 - d_cells * res / inflation_radius).max(0.0)
            } else {
                0.0
            }
        })
        .collect();
    Ok(CostMap {
        cells,
        ..CostMap::zeros_like(static_map)
    })
}
