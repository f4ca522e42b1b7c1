//! Static occupancy grid and its ascii-grid file format.
//!
//! Format: the first line is a header `res=<float> origin=<x> <y> <theta>`,
//! every following line is one grid row over `#` (occupied) and `.` (free).
//! The first grid line is the *top* row of the map (largest y), so the file
//! reads like a plan view. Cell `(0, 0)` is the bottom-left cell whose corner
//! sits at `origin`.

use std::fmt::Write as _;

use thiserror::Error;

use crate::geometry::{normalize_angle, Pose2D};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MapError {
    #[error("bad header: {0}")]
    BadHeader(String),
    #[error("row {line} has {found} cells, expected {expected}")]
    RaggedRows {
        line: usize,
        expected: usize,
        found: usize,
    },
    #[error("illegal character {ch:?} at line {line}, column {column}")]
    IllegalChar { line: usize, column: usize, ch: char },
    #[error("map has no grid rows")]
    EmptyGrid,
    #[error("resolution must be positive, got {0}")]
    NonPositiveResolution(f64),
    #[error("cell count {found} does not match {width}x{height}")]
    SizeMismatch {
        width: usize,
        height: usize,
        found: usize,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridMap {
    resolution: f64,
    width: usize,
    height: usize,
    origin: Pose2D,
    cells: Vec<bool>,
}

impl GridMap {
    pub fn new(
        width: usize,
        height: usize,
        resolution: f64,
        origin: Pose2D,
        cells: Vec<bool>,
    ) -> Result<Self, MapError> {
        if !(resolution > 0.0 && resolution.is_finite()) {
            return Err(MapError::NonPositiveResolution(resolution));
        }
        if width == 0 || height == 0 {
            return Err(MapError::EmptyGrid);
        }
        if cells.len() != width * height {
            return Err(MapError::SizeMismatch {
                width,
                height,
                found: cells.len(),
            });
        }
        Ok(Self {
            resolution,
            width,
            height,
            origin,
            cells,
        })
    }

    /// An all-free map.
    pub fn empty(width: usize, height: usize, resolution: f64, origin: Pose2D) -> Self {
        Self::new(width, height, resolution, origin, vec![false; width * height])
            .expect("empty map geometry must be valid")
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

    pub fn cells(&self) -> &[bool] {
        &self.cells
    }

    pub fn index(&self, cx: usize, cy: usize) -> usize {
        debug_assert!(cx < self.width && cy < self.height);
        cy * self.width + cx
    }

    pub fn is_occupied(&self, cx: usize, cy: usize) -> bool {
        self.cells[self.index(cx, cy)]
    }

    /// Occupancy for signed indices; `None` outside the grid.
    pub fn occupied_at(&self, ix: i64, iy: i64) -> Option<bool> {
        if ix < 0 || iy < 0 || ix as usize >= self.width || iy as usize >= self.height {
            None
        } else {
            Some(self.cells[iy as usize * self.width + ix as usize])
        }
    }

    pub fn set_occupied(&mut self, cx: usize, cy: usize, occupied: bool) {
        let i = self.index(cx, cy);
        self.cells[i] = occupied;
    }

    pub fn occupied_count(&self) -> usize {
        self.cells.iter().filter(|c| **c).count()
    }

    /// World point expressed in the map frame (meters, relative to the origin corner).
    pub fn world_to_local(&self, x: f64, y: f64) -> (f64, f64) {
        if self.origin.theta == 0.0 {
            return (x - self.origin.x, y - self.origin.y);
        }
        let (s, c) = self.origin.theta.sin_cos();
        let dx = x - self.origin.x;
        let dy = y - self.origin.y;
        (dx * c + dy * s, -dx * s + dy * c)
    }

    pub fn local_to_world(&self, lx: f64, ly: f64) -> (f64, f64) {
        if self.origin.theta == 0.0 {
            return (lx + self.origin.x, ly + self.origin.y);
        }
        let (s, c) = self.origin.theta.sin_cos();
        (
            self.origin.x + lx * c - ly * s,
            self.origin.y + lx * s + ly * c,
        )
    }

    /// Heading of a world-frame angle inside the map frame.
    pub fn world_angle_to_local(&self, theta: f64) -> f64 {
        normalize_angle(theta - self.origin.theta)
    }

    /// Signed cell indices of a world point (may be outside the grid).
    pub fn cell_index_of(&self, x: f64, y: f64) -> (i64, i64) {
        let (lx, ly) = self.world_to_local(x, y);
        (
            (lx / self.resolution).floor() as i64,
            (ly / self.resolution).floor() as i64,
        )
    }

    pub fn cell_of(&self, x: f64, y: f64) -> Option<(usize, usize)> {
        let (ix, iy) = self.cell_index_of(x, y);
        if ix < 0 || iy < 0 || ix as usize >= self.width || iy as usize >= self.height {
            None
        } else {
            Some((ix as usize, iy as usize))
        }
    }

    pub fn contains(&self, x: f64, y: f64) -> bool {
        self.cell_of(x, y).is_some()
    }

    pub fn cell_center(&self, cx: usize, cy: usize) -> (f64, f64) {
        self.local_to_world(
            (cx as f64 + 0.5) * self.resolution,
            (cy as f64 + 0.5) * self.resolution,
        )
    }

    /// Reflection of the map across the world x-axis.
    pub fn mirrored(&self) -> GridMap {
        let h = self.height as f64 * self.resolution;
        let flipped = self.origin.mirrored();
        let (s, c) = flipped.theta.sin_cos();
        // the reflected local y axis points the other way; re-anchor on the new bottom corner
        let origin = Pose2D::new(flipped.x + h * s, flipped.y - h * c, flipped.theta);
        let mut cells = vec![false; self.cells.len()];
        for cy in 0..self.height {
            let src = (self.height - 1 - cy) * self.width;
            cells[cy * self.width..(cy + 1) * self.width]
                .copy_from_slice(&self.cells[src..src + self.width]);
        }
        GridMap {
            resolution: self.resolution,
            width: self.width,
            height: self.height,
            origin,
            cells,
        }
    }

    /// Serializes back into the ascii-grid format.
    pub fn to_ascii(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "res={} origin={} {} {}",
            self.resolution, self.origin.x, self.origin.y, self.origin.theta
        );
        for cy in (0..self.height).rev() {
            for cx in 0..self.width {
                out.push(if self.is_occupied(cx, cy) { '#' } else { '.' });
            }
            out.push('\n');
        }
        out
    }
}

fn parse_header(line: &str) -> Result<(f64, Pose2D), MapError> {
    let bad = || MapError::BadHeader(line.to_string());
    let rest = line.trim().strip_prefix("res=").ok_or_else(bad)?;
    let (res_text, rest) = rest.split_once(char::is_whitespace).ok_or_else(bad)?;
    let resolution: f64 = res_text.parse().map_err(|_| bad())?;
    let rest = rest.trim_start().strip_prefix("origin=").ok_or_else(bad)?;
    let nums: Vec<f64> = rest
        .split_whitespace()
        .map(|t| t.parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|_| bad())?;
    if nums.len() != 3 || nums.iter().any(|n| !n.is_finite()) {
        return Err(bad());
    }
    if !(resolution > 0.0 && resolution.is_finite()) {
        return Err(MapError::NonPositiveResolution(resolution));
    }
    Ok((resolution, Pose2D::new(nums[0], nums[1], nums[2])))
}

/// Parses an ascii-grid document.
pub fn load_map(text: &str) -> Result<GridMap, MapError> {
    let mut lines = text.lines();
    let header = lines.next().ok_or(MapError::BadHeader(String::new()))?;
    let (resolution, origin) = parse_header(header)?;

    let rows: Vec<&str> = lines.collect();
    // tolerate trailing blank lines only
    let last = rows.iter().rposition(|r| !r.is_empty()).ok_or(MapError::EmptyGrid)?;
    let rows = &rows[..=last];

    let width = rows[0].chars().count();
    if width == 0 {
        return Err(MapError::RaggedRows {
            line: 2,
            expected: 1,
            found: 0,
        });
    }
    let height = rows.len();
    let mut cells = vec![false; width * height];
    for (i, row) in rows.iter().enumerate() {
        let line = i + 2;
        let count = row.chars().count();
        if count != width {
            return Err(MapError::RaggedRows {
                line,
                expected: width,
                found: count,
            });
        }
        let cy = height - 1 - i;
        for (cx, ch) in row.chars().enumerate() {
            cells[cy * width + cx] = match ch {
                '#' => true,
                '.' => false,
                other => {
                    return Err(MapError::IllegalChar {
                        line,
                        column: cx + 1,
                        ch: other,
                    })
                }
            };
        }
    }
    GridMap::new(width, height, resolution, origin, cells)
}
