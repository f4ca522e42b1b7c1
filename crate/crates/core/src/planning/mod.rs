//! Cost-aware grid planning and the turning-signal intent derived from it.

mod astar;
mod intent;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::Pose2D;

pub use astar::{edge_cost_units, plan_path, plan_path_with, Plan, PlannerConfig, COST_SCALE};
pub use intent::{lookahead_point, obstacle_side, turn_signal, OBSTACLE_REACH};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum PlanError {
    #[error("goal is unreachable")]
    NoPath,
    #[error("goal cell is lethal")]
    GoalInLethal,
    #[error("start cell is lethal")]
    StartInLethal,
    #[error("start or goal lies outside the map")]
    OutOfBounds,
    #[error("path is empty")]
    EmptyPath,
    #[error("obstacle is farther than the reach from every path point")]
    ObstacleFarFromPath,
    #[error("lookahead must be positive")]
    BadLookahead,
}

/// Planned trajectory on the ground plane.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Path {
    pub stamp: f64,
    pub poses: Vec<Pose2D>,
    pub goal: Goal,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Goal {
    pub x: f64,
    pub y: f64,
}

impl Path {
    /// A path with no poses, published when no plan exists.
    pub fn empty(stamp: f64, goal: (f64, f64)) -> Path {
        Path {
            stamp,
            poses: Vec::new(),
            goal: Goal { x: goal.0, y: goal.1 },
        }
    }

    /// Total polyline length through the poses.
    pub fn length(&self) -> f64 {
        self.poses
            .windows(2)
            .map(|w| w[0].distance_to(w[1].x, w[1].y))
            .sum()
    }

    pub fn is_empty(&self) -> bool {
        self.poses.is_empty()
    }

    /// Reflection across the world x-axis.
    pub fn mirrored(&self) -> Path {
        Path {
            stamp: self.stamp,
            poses: self.poses.iter().map(Pose2D::mirrored).collect(),
            goal: Goal {
                x: self.goal.x,
                y: -self.goal.y,
            },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Signal {
    Left,
    Right,
    Straight,
}

impl Signal {
    pub fn flipped(self) -> Signal {
        match self {
            Signal::Left => Signal::Right,
            Signal::Right => Signal::Left,
            Signal::Straight => Signal::Straight,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TurnSignal {
    pub value: Signal,
    pub stamp: f64,
}

/// Which way the robot passes an obstacle.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Left,
    Right,
}

impl Side {
    pub fn flipped(self) -> Side {
        match self {
            Side::Left => Side::Right,
            Side::Right => Side::Left,
        }
    }
}
