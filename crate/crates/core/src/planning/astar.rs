use std::cmp::Reverse;
use std::collections::BinaryHeap;

use super::{Goal, Path, PlanError};
use crate::geometry::Pose2D;
use crate::perception::CostMap;

/// Integer cost units per meter. Costs are summed as integers so that equal
/// paths compare equal regardless of summation order.
pub const COST_SCALE: f64 = 1e6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlannerConfig {
    /// Weight of occupancy probability in the traversal cost.
    pub lambda: f64,
    /// Cells with `p >= lethal_threshold` are impassable.
    pub lethal_threshold: f64,
}

impl Default for PlannerConfig {
    fn default() -> Self {
        Self {
            lambda: 10.0,
            lethal_threshold: 0.9,
        }
    }
}

/// Result of a successful search.
#[derive(Debug, Clone, PartialEq)]
pub struct Plan {
    pub path: Path,
    pub cost_units: u64,
}

impl Plan {
    /// Path cost in meters-equivalent.
    pub fn cost(&self) -> f64 {
        self.cost_units as f64 / COST_SCALE
    }
}

/// Cost of one step of length `len` into a cell with probability `p`.
pub fn edge_cost_units(len: f64, p: f64, lambda: f64) -> u64 {
    (len * (1.0 + lambda * p) * COST_SCALE).round() as u64
}

const NEIGHBORS: [(i64, i64); 8] = [
    (1, 0),
    (-1, 0),
    (0, 1),
    (0, -1),
    (1, 1),
    (1, -1),
    (-1, 1),
    (-1, -1),
];

/// A* over the 8-connected grid with the default cost weight.
pub fn plan_path(cost: &CostMap, start: Pose2D, goal: (f64, f64), lethal_threshold: f64) -> Result<Plan, PlanError> {
    plan_path_with(
        cost,
        start,
        goal,
        &PlannerConfig {
            lethal_threshold,
            ..PlannerConfig::default()
        },
    )
}

/// A* over the 8-connected grid.
///
/// Steps cost `len * (1 + lambda * p)` of the entered cell. Diagonal steps may
/// not cut the corner of a lethal cell. Ties on f break by smaller accumulated
/// probability, then by distance from the start-goal line, then by
/// (row, column). Rows are counted in whichever vertical orientation
/// [`canonical_flip`] picks, so a problem and its reflection across the x-axis
/// resolve ties identically and yield reflected paths.
pub fn plan_path_with(cost: &CostMap, start: Pose2D, goal: (f64, f64), cfg: &PlannerConfig) -> Result<Plan, PlanError> {
    let geom = cost.geometry();
    let (Some(s), Some(g)) = (geom.cell_of(start.x, start.y), geom.cell_of(goal.0, goal.1)) else {
        return Err(PlanError::OutOfBounds);
    };
    if cost.get(s.0, s.1) >= cfg.lethal_threshold {
        return Err(PlanError::StartInLethal);
    }
    if cost.get(g.0, g.1) >= cfg.lethal_threshold {
        return Err(PlanError::GoalInLethal);
    }

    let (w, h) = (cost.width(), cost.height());
    // search rows <-> map rows; an involution
    let flip = canonical_flip(cost, s, g);
    let row = |r: usize| if flip { h - 1 - r } else { r };
    let p_at = |cx: usize, cy: usize| cost.get(cx, row(cy));
    let lethal = |cx: usize, cy: usize| p_at(cx, cy) >= cfg.lethal_threshold;
    let (s, g) = ((s.0, row(s.1)), (g.0, row(g.1)));

    let res = cost.resolution();
    let straight = edge_cost_units(res, 0.0, cfg.lambda);
    let diagonal = edge_cost_units(res * std::f64::consts::SQRT_2, 0.0, cfg.lambda);
    let heuristic = |cx: usize, cy: usize| {
        let dx = cx.abs_diff(g.0) as u64;
        let dy = cy.abs_diff(g.1) as u64;
        dx.min(dy) * diagonal + dx.abs_diff(dy) * straight
    };
    let (lx, ly) = (g.0 as i64 - s.0 as i64, g.1 as i64 - s.1 as i64);
    let off_line = |cx: usize, cy: usize| (lx * (cy as i64 - s.1 as i64) - ly * (cx as i64 - s.0 as i64)).unsigned_abs();

    let idx = |cx: usize, cy: usize| cy * w + cx;
    let mut best: Vec<Option<(u64, u64)>> = vec![None; w * h];
    let mut parent = vec![usize::MAX; w * h];
    let mut closed = vec![false; w * h];
    let mut open = BinaryHeap::new();
    best[idx(s.0, s.1)] = Some((0, 0));
    open.push(Reverse((heuristic(s.0, s.1), 0u64, off_line(s.0, s.1), s.1, s.0, 0u64)));

    while let Some(Reverse((_, sum_p, _, cy, cx, g_cost))) = open.pop() {
        let i = idx(cx, cy);
        if closed[i] || best[i] != Some((g_cost, sum_p)) {
            continue;
        }
        closed[i] = true;
        if (cx, cy) == g {
            let mut cells = vec![(cx, row(cy))];
            let mut k = i;
            while parent[k] != usize::MAX {
                k = parent[k];
                cells.push((k % w, row(k / w)));
            }
            cells.reverse();
            return Ok(Plan {
                path: build_path(cost, &cells, start, goal),
                cost_units: g_cost,
            });
        }
        for (dx, dy) in NEIGHBORS {
            let (nx, ny) = (cx as i64 + dx, cy as i64 + dy);
            if nx < 0 || ny < 0 || nx >= w as i64 || ny >= h as i64 {
                continue;
            }
            let (nx, ny) = (nx as usize, ny as usize);
            if lethal(nx, ny) || closed[idx(nx, ny)] {
                continue;
            }
            let diag = dx != 0 && dy != 0;
            if diag && (lethal(nx, cy) || lethal(cx, ny)) {
                continue;
            }
            let p = p_at(nx, ny);
            let len = if diag { res * std::f64::consts::SQRT_2 } else { res };
            let ng = g_cost + edge_cost_units(len, p, cfg.lambda);
            let np = sum_p + (p * COST_SCALE).round() as u64;
            let j = idx(nx, ny);
            if best[j].is_none_or(|b| (ng, np) < b) {
                best[j] = Some((ng, np));
                parent[j] = i;
                open.push(Reverse((ng + heuristic(nx, ny), np, off_line(nx, ny), ny, nx, ng)));
            }
        }
    }
    Err(PlanError::NoPath)
}

/// Whether to search with rows counted top-down. Decided by the start row,
/// then the goal row, then the grid contents, comparing the problem against
/// its vertical reflection; only a reflection-symmetric problem is a tie.
fn canonical_flip(cost: &CostMap, s: (usize, usize), g: (usize, usize)) -> bool {
    let h = cost.height();
    let ord = s.1
        .cmp(&(h - 1 - s.1))
        .then(g.1.cmp(&(h - 1 - g.1)))
        .then_with(|| {
            (0..h / 2)
                .flat_map(|r| (0..cost.width()).map(move |c| (r, c)))
                .map(|(r, c)| cost.get(c, r).total_cmp(&cost.get(c, h - 1 - r)))
                .find(|o| o.is_ne())
                .unwrap_or(std::cmp::Ordering::Equal)
        });
    ord.is_gt()
}

fn build_path(cost: &CostMap, cells: &[(usize, usize)], start: Pose2D, goal: (f64, f64)) -> Path {
    let geom = cost.geometry();
    let pts: Vec<(f64, f64)> = cells.iter().map(|&(cx, cy)| geom.cell_center(cx, cy)).collect();
    let mut poses = Vec::with_capacity(pts.len());
    let mut heading = start.theta;
    for (k, &(x, y)) in pts.iter().enumerate() {
        if let Some(&(nx, ny)) = pts.get(k + 1) {
            heading = (ny - y).atan2(nx - x);
        }
        poses.push(Pose2D::new(x, y, heading));
    }
    Path {
        stamp: 0.0,
        poses,
        goal: Goal { x: goal.0, y: goal.1 },
    }
}
