use super::{Path, PlanError, Side, Signal, TurnSignal};
use crate::geometry::{normalize_angle, Pose2D};

/// Maximum obstacle distance from the path for [`obstacle_side`].
pub const OBSTACLE_REACH: f64 = 2.0;

const ARRIVED: f64 = 1e-9;
const ASTERN: f64 = 1e-9;

/// Point at arc length `s` along the polyline from vertex `from`, clamped to
/// the last pose.
fn point_along(poses: &[Pose2D], from: usize, mut s: f64) -> (f64, f64) {
    for w in poses[from..].windows(2) {
        let seg = w[0].distance_to(w[1].x, w[1].y);
        if s <= seg && seg > 0.0 {
            let t = s / seg;
            return (w[0].x + t * (w[1].x - w[0].x), w[0].y + t * (w[1].y - w[0].y));
        }
        s -= seg;
    }
    let last = poses[poses.len() - 1];
    (last.x, last.y)
}

/// The point `lookahead` meters of arc length past the path vertex nearest
/// to `current`, clamped to the path end.
pub fn lookahead_point(path: &Path, current: &Pose2D, lookahead: f64) -> Result<(f64, f64), PlanError> {
    if path.poses.is_empty() {
        return Err(PlanError::EmptyPath);
    }
    if !(lookahead > 0.0) {
        return Err(PlanError::BadLookahead);
    }
    let nearest = path
        .poses
        .iter()
        .enumerate()
        .map(|(i, p)| (i, p.distance_to(current.x, current.y)))
        .fold((0, f64::INFINITY), |best, c| if c.1 < best.1 { c } else { best })
        .0;
    Ok(point_along(&path.poses, nearest, lookahead))
}

/// Left/Right/Straight from the bearing of the lookahead point on the path.
///
/// The lookahead point lies `lookahead` meters of arc length past the path
/// vertex nearest to `current`.
pub fn turn_signal(path: &Path, current: &Pose2D, lookahead: f64, dead_band: f64) -> Result<TurnSignal, PlanError> {
    let (tx, ty) = lookahead_point(path, current, lookahead)?;
    let (dx, dy) = (tx - current.x, ty - current.y);
    // at the goal the bearing is undefined
    let value = if dx.hypot(dy) < ARRIVED {
        Signal::Straight
    } else {
        let delta = normalize_angle(dy.atan2(dx) - current.theta);
        // dead astern has no side; +pi is only the wrap convention
        if std::f64::consts::PI - delta.abs() < ASTERN {
            Signal::Straight
        } else if delta > dead_band {
            Signal::Left
        } else if delta < -dead_band {
            Signal::Right
        } else {
            Signal::Straight
        }
    };
    Ok(TurnSignal {
        value,
        stamp: path.stamp,
    })
}

fn segment_distance(a: (f64, f64), b: (f64, f64), o: (f64, f64)) -> f64 {
    let (vx, vy) = (b.0 - a.0, b.1 - a.1);
    let len2 = vx * vx + vy * vy;
    let t = if len2 > 0.0 {
        (((o.0 - a.0) * vx + (o.1 - a.1) * vy) / len2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    (o.0 - a.0 - t * vx).hypot(o.1 - a.1 - t * vy)
}

/// Side on which the path passes `obstacle`: an obstacle on the robot's
/// right means the robot goes by on the left, and vice versa.
///
/// Uses the path segment nearest to the obstacle; a one-pose path uses its
/// heading. An obstacle exactly on the path counts as passed on the left.
pub fn obstacle_side(path: &Path, obstacle: (f64, f64)) -> Result<Side, PlanError> {
    let poses = &path.poses;
    if poses.is_empty() {
        return Err(PlanError::EmptyPath);
    }
    let (a, b, dist) = if poses.len() == 1 {
        let p = poses[0];
        let b = (p.x + p.theta.cos(), p.y + p.theta.sin());
        ((p.x, p.y), b, p.distance_to(obstacle.0, obstacle.1))
    } else {
        poses
            .windows(2)
            .map(|w| {
                let (a, b) = ((w[0].x, w[0].y), (w[1].x, w[1].y));
                (a, b, segment_distance(a, b, obstacle))
            })
            .fold(None, |best: Option<((f64, f64), (f64, f64), f64)>, c| match best {
                Some(bst) if bst.2 <= c.2 => Some(bst),
                _ => Some(c),
            })
            .unwrap()
    };
    if dist > OBSTACLE_REACH {
        return Err(PlanError::ObstacleFarFromPath);
    }
    let cross = (b.0 - a.0) * (obstacle.1 - a.1) - (b.1 - a.1) * (obstacle.0 - a.0);
    Ok(if cross > 0.0 { Side::Right } else { Side::Left })
}
