//! Leg-pair human detector over a single laser scan.

use serde::{Deserialize, Serialize};

use crate::world::LaserScan;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HumanDetection {
    pub x: f64,
    pub y: f64,
    pub confidence: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LegParams {
    /// Gap between consecutive hits that starts a new cluster, meters.
    pub cluster_break: f64,
    pub leg_width_min: f64,
    pub leg_width_max: f64,
    pub pair_sep_min: f64,
    pub pair_sep_max: f64,
}

impl Default for LegParams {
    fn default() -> Self {
        Self {
            cluster_break: 0.10,
            leg_width_min: 0.05,
            leg_width_max: 0.25,
            pair_sep_min: 0.15,
            pair_sep_max: 0.45,
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct Leg {
    cx: f64,
    cy: f64,
}

/// Splits the scan's hits into clusters of consecutive beams. A beam without
/// a return ends the current cluster. For a full-circle scan the first and
/// last clusters are joined when they touch across the seam.
fn clusters(scan: &LaserScan, cluster_break: f64) -> Vec<Vec<(f64, f64)>> {
    let mut out: Vec<Vec<(f64, f64)>> = Vec::new();
    let mut current: Vec<(f64, f64)> = Vec::new();
    let mut prev_index: Option<usize> = None;
    let mut first_beam = None;
    let mut last_beam = None;
    for (i, x, y) in scan.hit_points() {
        first_beam.get_or_insert(i);
        last_beam = Some(i);
        let contiguous = prev_index == Some(i.wrapping_sub(1));
        let close = current
            .last()
            .map(|(px, py)| (px - x).hypot(py - y) <= cluster_break)
            .unwrap_or(false);
        if !(contiguous && close) && !current.is_empty() {
            out.push(std::mem::take(&mut current));
        }
        current.push((x, y));
        prev_index = Some(i);
    }
    if !current.is_empty() {
        out.push(current);
    }

    let n = scan.ranges.len();
    let full_circle = n >= 2 && (scan.angle_increment() * n as f64) >= 2.0 * std::f64::consts::PI - 1e-9;
    if full_circle && out.len() > 1 && first_beam == Some(0) && last_beam == Some(n - 1) {
        let (fx, fy) = out[0][0];
        let (lx, ly) = *out.last().unwrap().last().unwrap();
        if (fx - lx).hypot(fy - ly) <= cluster_break {
            let head = out.remove(0);
            out.last_mut().unwrap().extend(head);
        }
    }
    out
}

/// Finds pairs of leg-sized clusters at a plausible stride apart.
pub fn detect_humans(scan: &LaserScan, params: &LegParams) -> Vec<HumanDetection> {
    let legs: Vec<Leg> = clusters(scan, params.cluster_break)
        .into_iter()
        .filter_map(|c| {
            let (fx, fy) = c[0];
            let (lx, ly) = c[c.len() - 1];
            let width = (fx - lx).hypot(fy - ly);
            if width < params.leg_width_min || width > params.leg_width_max {
                return None;
            }
            let n = c.len() as f64;
            let cx = c.iter().map(|p| p.0).sum::<f64>() / n;
            let cy = c.iter().map(|p| p.1).sum::<f64>() / n;
            Some(Leg { cx, cy })
        })
        .collect();

    let mut candidates: Vec<(f64, usize, usize)> = Vec::new();
    for i in 0..legs.len() {
        for j in i + 1..legs.len() {
            let sep = (legs[i].cx - legs[j].cx).hypot(legs[i].cy - legs[j].cy);
            if sep >= params.pair_sep_min && sep <= params.pair_sep_max {
                candidates.push((sep, i, j));
            }
        }
    }
    candidates.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));

    let sep_mid = (params.pair_sep_min + params.pair_sep_max) / 2.0;
    let half_range = (params.pair_sep_max - params.pair_sep_min) / 2.0;
    let mut used = vec![false; legs.len()];
    let mut out = Vec::new();
    for (sep, i, j) in candidates {
        if used[i] || used[j] {
            continue;
        }
        used[i] = true;
        used[j] = true;
        let confidence = if half_range > 0.0 {
            (1.0 - (sep - sep_mid).abs() / half_range).clamp(0.0, 1.0)
        } else {
            1.0
        };
        out.push(HumanDetection {
            x: (legs[i].cx + legs[j].cx) / 2.0,
            y: (legs[i].cy + legs[j].cy) / 2.0,
            confidence,
        });
    }
    out
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::geometry::Pose2D;
    use crate::world::ScanParams;

    /// Ray/circle intersection oracle: scan of circular legs seen from `pose`.
    pub(crate) fn scan_of_circles(pose: Pose2D, circles: &[(f64, f64, f64)], params: &ScanParams) -> LaserScan {
        let mut scan = LaserScan::blank(0.0, pose, params);
        for (i, slot) in scan.ranges.iter_mut().enumerate() {
            let a = pose.theta + params.beam_angle(i);
            let (dy, dx) = a.sin_cos();
            let mut best: Option<f64> = None;
            for (cx, cy, r) in circles {
                let (ox, oy) = (pose.x - cx, pose.y - cy);
                let b = ox * dx + oy * dy;
                let c = ox * ox + oy * oy - r * r;
                let disc = b * b - c;
                if disc < 0.0 {
                    continue;
                }
                let t = -b - disc.sqrt();
                if t > 0.0 && best.map_or(true, |bt| t < bt) {
                    best = Some(t);
                }
            }
            *slot = best.filter(|t| *t >= params.range_min && *t <= params.range_max);
        }
        scan
    }

    /// Centroid of the arc of a circle visible from `(sx, sy)`.
    pub(crate) fn visible_arc_centroid(sx: f64, sy: f64, (cx, cy, r): (f64, f64, f64)) -> (f64, f64) {
        let d = (sx - cx).hypot(sy - cy);
        let half = (r / d).acos();
        let k = r * half.sin() / half;
        (cx + k * (sx - cx) / d, cy + k * (sy - cy) / d)
    }

    fn wall_scan() -> LaserScan {
        // straight wall x = 1.5 seen from the origin
        let params = ScanParams::default();
        let pose = Pose2D::new(0.0, 0.0, 0.0);
        let mut scan = LaserScan::blank(0.0, pose, &params);
        for (i, slot) in scan.ranges.iter_mut().enumerate() {
            let a = params.beam_angle(i);
            if a.abs() < 30.5f64.to_radians() {
                *slot = Some(1.5 / a.cos());
            }
        }
        scan
    }

    #[test]
    fn blank_scan_no_detections() {
        let scan = LaserScan::blank(0.0, Pose2D::default(), &ScanParams::default());
        assert!(detect_humans(&scan, &LegParams::default()).is_empty());
    }

    #[test]
    fn two_legs_one_detection() {
        let legs = [(1.5, 0.15, 0.06), (1.5, -0.15, 0.06)];
        let scan = scan_of_circles(Pose2D::default(), &legs, &ScanParams::default());
        let dets = detect_humans(&scan, &LegParams::default());
        assert_eq!(dets.len(), 1);
        let d = dets[0];
        assert!(d.x.hypot(d.y) <= scan.range_max);
        let a = visible_arc_centroid(0.0, 0.0, legs[0]);
        let b = visible_arc_centroid(0.0, 0.0, legs[1]);
        let truth = ((a.0 + b.0) / 2.0, (a.1 + b.1) / 2.0);
        assert!((d.x - truth.0).hypot(d.y - truth.1) < 0.05, "{d:?} vs {truth:?}");
        assert!(d.confidence > 0.5 && d.confidence <= 1.0);
    }

    #[test]
    fn wall_is_not_a_leg() {
        let scan = wall_scan();
        assert!(scan.return_count() >= 60);
        assert!(detect_humans(&scan, &LegParams::default()).is_empty());
    }

    #[test]
    fn seam_clusters_are_joined() {
        // an object straddling the +-PI seam behind the robot
        let legs = [(-1.2, 0.0, 0.06)];
        let scan = scan_of_circles(Pose2D::default(), &legs, &ScanParams::default());
        assert!(scan.ranges[0].is_some() && scan.ranges[359].is_some());
        let cl = clusters(&scan, 0.1);
        assert_eq!(cl.len(), 1);
    }

    #[test]
    fn each_leg_used_once() {
        // three legs in a row: only one pair may form
        let legs = [(1.5, 0.3, 0.06), (1.5, 0.0, 0.06), (1.5, -0.3, 0.06)];
        let scan = scan_of_circles(Pose2D::default(), &legs, &ScanParams::default());
        assert_eq!(detect_humans(&scan, &LegParams::default()).len(), 1);
    }

    #[test]
    fn confidence_peaks_mid_range() {
        let p = LegParams::default();
        let legs = [(1.5, 0.15, 0.06), (1.5, -0.15, 0.06)];
        let scan = scan_of_circles(Pose2D::default(), &legs, &ScanParams::default());
        let d = detect_humans(&scan, &p)[0];
        // cluster centroids sit slightly closer than the leg centres
        assert!(d.confidence > 0.7, "{d:?}");
    }
}
