//! Unicycle kinematics with footprint collision against the grid.

use std::sync::Arc;

use super::fault::FaultSpec;
use super::map::GridMap;
use super::WorldError;
use crate::geometry::{Pose2D, Twist};

pub const MAX_DT: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimConfig {
    /// Footprint disk radius, meters.
    pub robot_radius: f64,
    pub v_max: f64,
    pub w_max: f64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            robot_radius: 0.18,
            v_max: 1.0,
            w_max: 2.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimState {
    pub clock: f64,
    pub true_pose: Pose2D,
    pub map: Arc<GridMap>,
    pub faults: Vec<FaultSpec>,
    /// Latched: once set it stays set.
    pub collided: bool,
}

impl SimState {
    pub fn new(map: Arc<GridMap>, pose: Pose2D) -> Self {
        Self {
            clock: 0.0,
            true_pose: pose,
            map,
            faults: Vec::new(),
            collided: false,
        }
    }

    pub fn lidar_faulted(&self) -> bool {
        super::fault::fault_active(&self.faults, self.clock)
    }
}

/// Whether a disk of `radius` centred on the world point overlaps an occupied
/// cell. Cells outside the grid count as occupied.
pub fn footprint_collides(map: &GridMap, x: f64, y: f64, radius: f64) -> bool {
    let (lx, ly) = map.world_to_local(x, y);
    let res = map.resolution();
    let r2 = radius * radius;
    let x0 = ((lx - radius) / res).floor() as i64;
    let x1 = ((lx + radius) / res).floor() as i64;
    let y0 = ((ly - radius) / res).floor() as i64;
    let y1 = ((ly + radius) / res).floor() as i64;
    for iy in y0..=y1 {
        for ix in x0..=x1 {
            if map.occupied_at(ix, iy) == Some(false) {
                continue;
            }
            let cx = lx.clamp(ix as f64 * res, (ix + 1) as f64 * res);
            let cy = ly.clamp(iy as f64 * res, (iy + 1) as f64 * res);
            let d2 = (lx - cx).powi(2) + (ly - cy).powi(2);
            if d2 < r2 {
                return true;
            }
        }
    }
    false
}

/// Advances the simulation by `dt`.
///
/// The end pose is the single Euler unicycle update. The straight sweep from
/// the start pose to it is checked in substeps no longer than a quarter cell;
/// at the first colliding substep the robot is left at the previous one and
/// `collided` latches.
pub fn step(state: &SimState, cmd: Twist, dt: f64, cfg: &SimConfig) -> Result<SimState, WorldError> {
    if !(dt > 0.0) {
        return Err(WorldError::NonPositiveDt(dt));
    }
    if dt > MAX_DT {
        return Err(WorldError::DtTooLarge(dt));
    }
    if !cmd.is_finite() {
        return Err(WorldError::NonFiniteCommand);
    }
    let cmd = cmd.clamped(cfg.v_max, cfg.w_max);
    let mut next = state.clone();
    next.clock = state.clock + dt;
    if cmd.v == 0.0 && cmd.w == 0.0 {
        return Ok(next);
    }

    let p0 = state.true_pose;
    let (s, c) = p0.theta.sin_cos();
    let dx = cmd.v * c * dt;
    let dy = cmd.v * s * dt;
    let dtheta = cmd.w * dt;
    let target = Pose2D::new(p0.x + dx, p0.y + dy, p0.theta + dtheta);

    let travel = dx.hypot(dy);
    let max_sub = state.map.resolution() / 4.0;
    let n = ((travel / max_sub).ceil() as usize).max(1);
    let mut last_free = p0;
    for k in 1..=n {
        let f = k as f64 / n as f64;
        let p = if k == n {
            target
        } else {
            Pose2D::new(p0.x + dx * f, p0.y + dy * f, p0.theta + dtheta * f)
        };
        if travel > 0.0 && footprint_collides(&state.map, p.x, p.y, cfg.robot_radius) {
            next.collided = true;
            next.true_pose = last_free;
            return Ok(next);
        }
        last_free = p;
    }
    next.true_pose = target;
    Ok(next)
}
