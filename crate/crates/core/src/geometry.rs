//! Planar pose and velocity primitives shared by every module.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

/// Wraps an angle into `(-PI, PI]`.
pub fn normalize_angle(theta: f64) -> f64 {
    if theta > -PI && theta <= PI {
        return theta;
    }
    let mut a = theta.rem_euclid(2.0 * PI);
    if a > PI {
        a -= 2.0 * PI;
    }
    // rem_euclid can land on exactly 2*PI for tiny negative inputs
    if a <= -PI {
        a += 2.0 * PI;
    }
    a
}

/// Position and heading in the world frame. `theta` is kept in `(-PI, PI]`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Pose2D {
    pub x: f64,
    pub y: f64,
    pub theta: f64,
}

impl Pose2D {
    pub fn new(x: f64, y: f64, theta: f64) -> Self {
        Self {
            x,
            y,
            theta: normalize_angle(theta),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.theta.is_finite()
    }

    pub fn distance_to(&self, x: f64, y: f64) -> f64 {
        (self.x - x).hypot(self.y - y)
    }

    /// Applies an increment expressed in this pose's own frame.
    pub fn compose(&self, delta: &Pose2D) -> Pose2D {
        let (s, c) = self.theta.sin_cos();
        Pose2D::new(
            self.x + delta.x * c - delta.y * s,
            self.y + delta.x * s + delta.y * c,
            self.theta + delta.theta,
        )
    }

    /// The increment `d` such that `from.compose(&d) == self` (up to rounding).
    pub fn relative_to(&self, from: &Pose2D) -> Pose2D {
        let (s, c) = from.theta.sin_cos();
        let dx = self.x - from.x;
        let dy = self.y - from.y;
        Pose2D::new(dx * c + dy * s, -dx * s + dy * c, self.theta - from.theta)
    }

    /// Reflection across the world x-axis.
    pub fn mirrored(&self) -> Pose2D {
        Pose2D::new(self.x, -self.y, -self.theta)
    }
}

/// Commanded body velocity.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Twist {
    /// Forward speed, m/s.
    pub v: f64,
    /// Yaw rate, rad/s.
    pub w: f64,
}

impl Twist {
    pub fn new(v: f64, w: f64) -> Self {
        Self { v, w }
    }

    pub fn is_finite(&self) -> bool {
        self.v.is_finite() && self.w.is_finite()
    }

    pub fn clamped(&self, v_max: f64, w_max: f64) -> Twist {
        Twist {
            v: self.v.clamp(-v_max, v_max),
            w: self.w.clamp(-w_max, w_max),
        }
    }
}
