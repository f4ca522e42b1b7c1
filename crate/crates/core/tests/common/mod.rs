//! Independent oracles shared by the integration and acceptance tests.
#![allow(dead_code)]
pub mod wire;

use std::cmp::Reverse;
use std::collections::BinaryHeap;

use clearbot::perception::{estimate_pose, mcl_step, CostMap, LikelihoodField, MclConfig, ParticleSet};
use clearbot::scenario::HALLWAY;
use clearbot::world::{cast_ray, load_map, raycast_scan, GridMap, LaserScan, ScanParams};
use clearbot::Pose2D;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Optimal 8-connected path cost by plain Dijkstra, in integer micro-units.
/// Mirrors the planner's cost law: step length times `1 + lambda * p` of the
/// entered cell, lethal cells impassable, no cutting past lethal corners.
pub fn dijkstra_cost(cost: &CostMap, start: (usize, usize), goal: (usize, usize), lambda: f64, lethal: f64) -> Option<u64> {
    let (w, h) = (cost.width() as i64, cost.height() as i64);
    let blocked = |x: i64, y: i64| cost.get(x as usize, y as usize) >= lethal;
    let mut dist = vec![u64::MAX; (w * h) as usize];
    let mut heap = BinaryHeap::new();
    dist[start.1 * w as usize + start.0] = 0;
    heap.push(Reverse((0u64, start.0 as i64, start.1 as i64)));
    while let Some(Reverse((d, x, y))) = heap.pop() {
        if (x as usize, y as usize) == goal {
            return Some(d);
        }
        if d > dist[(y * w + x) as usize] {
            continue;
        }
        for dx in -1i64..=1 {
            for dy in -1i64..=1 {
                if dx == 0 && dy == 0 {
                    continue;
                }
                let (nx, ny) = (x + dx, y + dy);
                if nx < 0 || ny < 0 || nx >= w || ny >= h || blocked(nx, ny) {
                    continue;
                }
                if dx != 0 && dy != 0 && (blocked(nx, y) || blocked(x, ny)) {
                    continue;
                }
                let len = cost.resolution() * ((dx * dx + dy * dy) as f64).sqrt();
                let p = cost.get(nx as usize, ny as usize);
                let nd = d + (len * (1.0 + lambda * p) * 1e6).round() as u64;
                let k = (ny * w + nx) as usize;
                if nd < dist[k] {
                    dist[k] = nd;
                    heap.push(Reverse((nd, nx, ny)));
                }
            }
        }
    }
    None
}

/// Range by sampling the ray every `step` meters; `None` when it leaves the
/// grid or passes `max_range` first.
pub fn march_ray(map: &GridMap, x: f64, y: f64, heading: f64, max_range: f64, step: f64) -> Option<f64> {
    let (s, c) = heading.sin_cos();
    let mut k = 0u64;
    loop {
        let t = k as f64 * step;
        if t > max_range {
            return None;
        }
        let (ix, iy) = map.cell_index_of(x + t * c, y + t * s);
        match map.occupied_at(ix, iy) {
            None => return None,
            Some(true) => return Some(t),
            Some(false) => {}
        }
        k += 1;
    }
}

/// Bordered room with random axis-aligned blocks.
pub fn random_block_map(rng: &mut ChaCha8Rng, w: usize, h: usize, blocks: usize) -> GridMap {
    let mut m = GridMap::empty(w, h, 0.1, Pose2D::new(rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0), 0.0));
    for i in 0..w {
        m.set_occupied(i, 0, true);
        m.set_occupied(i, h - 1, true);
    }
    for j in 0..h {
        m.set_occupied(0, j, true);
        m.set_occupied(w - 1, j, true);
    }
    for _ in 0..blocks {
        let (bw, bh) = (rng.random_range(1..6), rng.random_range(1..6));
        let (x0, y0) = (rng.random_range(1..w - 1), rng.random_range(1..h - 1));
        for cx in x0..(x0 + bw).min(w - 1) {
            for cy in y0..(y0 + bh).min(h - 1) {
                m.set_occupied(cx, cy, true);
            }
        }
    }
    m
}

/// Uniform pose inside a free cell, uniform heading.
pub fn random_free_pose(rng: &mut ChaCha8Rng, map: &GridMap) -> Pose2D {
    loop {
        let cx = rng.random_range(0..map.width());
        let cy = rng.random_range(0..map.height());
        if map.is_occupied(cx, cy) {
            continue;
        }
        let res = map.resolution();
        let (x, y) = map.local_to_world((cx as f64 + rng.random::<f64>()) * res, (cy as f64 + rng.random::<f64>()) * res);
        return Pose2D::new(x, y, rng.random_range(-std::f64::consts::PI..std::f64::consts::PI));
    }
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Length of the ray's passage through cell `(ix, iy)` by slab intersection,
/// in meters. Zero when the ray misses the cell.
pub fn cell_chord(map: &GridMap, x: f64, y: f64, heading: f64, ix: i64, iy: i64) -> f64 {
    let (lx, ly) = map.world_to_local(x, y);
    let a = map.world_angle_to_local(heading);
    let (dy, dx) = a.sin_cos();
    let res = map.resolution();
    let slab = |o: f64, d: f64, lo: f64| -> (f64, f64) {
        if d == 0.0 {
            if o >= lo && o <= lo + res {
                (f64::NEG_INFINITY, f64::INFINITY)
            } else {
                (f64::INFINITY, f64::NEG_INFINITY)
            }
        } else {
            let (t0, t1) = ((lo - o) / d, (lo + res - o) / d);
            (t0.min(t1), t0.max(t1))
        }
    };
    let (ax, bx) = slab(lx, dx, ix as f64 * res);
    let (ay, by) = slab(ly, dy, iy as f64 * res);
    (bx.min(by) - ax.max(ay).max(0.0)).max(0.0)
}

/// Random cost grid: a fraction of lethal cells, the rest free or graded.
pub fn random_costmap(seed: u64, w: usize, h: usize, lethal_frac: f64) -> CostMap {
    let mut r = rng(seed);
    let geom = GridMap::empty(w, h, 0.1, Pose2D::new(-1.0, 0.5, 0.0));
    let cells = (0..w * h)
        .map(|_| {
            if r.random::<f64>() < lethal_frac {
                1.0
            } else if r.random::<f64>() < 0.5 {
                0.0
            } else {
                r.random::<f64>() * 0.9
            }
        })
        .collect();
    CostMap::from_cells(&geom, cells).unwrap()
}

/// Centre of a random non-lethal cell with a random heading.
pub fn free_cell_pose(cost: &CostMap, seed: u64) -> Option<Pose2D> {
    let mut r = rng(seed);
    let geom = cost.geometry();
    for _ in 0..1000 {
        let (cx, cy) = (r.random_range(0..cost.width()), r.random_range(0..cost.height()));
        if cost.get(cx, cy) < 0.9 {
            let (x, y) = geom.cell_center(cx, cy);
            return Some(Pose2D::new(x, y, r.random_range(-3.0..3.0)));
        }
    }
    None
}

/// Scan of circular legs seen from `pose`, by ray/circle intersection.
pub fn scan_of_circles(pose: Pose2D, circles: &[(f64, f64, f64)], params: &ScanParams) -> LaserScan {
    let mut scan = LaserScan::blank(0.0, pose, params);
    for (i, slot) in scan.ranges.iter_mut().enumerate() {
        let (dy, dx) = (pose.theta + params.beam_angle(i)).sin_cos();
        let mut best: Option<f64> = None;
        for (cx, cy, r) in circles {
            let (ox, oy) = (pose.x - cx, pose.y - cy);
            let b = ox * dx + oy * dy;
            let disc = b * b - (ox * ox + oy * oy - r * r);
            if disc < 0.0 {
                continue;
            }
            let t = -b - disc.sqrt();
            if t > 0.0 && best.is_none_or(|bt| t < bt) {
                best = Some(t);
            }
        }
        *slot = best.filter(|t| *t >= params.range_min && *t <= params.range_max);
    }
    scan
}

/// Centroid of the arc of a circle visible from `(sx, sy)`.
pub fn visible_arc_centroid(sx: f64, sy: f64, (cx, cy, r): (f64, f64, f64)) -> (f64, f64) {
    let d = (sx - cx).hypot(sy - cy);
    let half = (r / d).acos();
    let k = r * half.sin() / half;
    (cx + k * (sx - cx) / d, cy + k * (sy - cy) / d)
}

/// Two legs of radius 0.06 with centres 0.30 m apart across the line of
/// sight from the origin to `(x, y)`.
pub fn leg_pair(x: f64, y: f64) -> [(f64, f64, f64); 2] {
    let bearing = y.atan2(x);
    let (ux, uy) = (bearing.cos(), bearing.sin());
    [(x - 0.15 * uy, y + 0.15 * ux, 0.06), (x + 0.15 * uy, y - 0.15 * ux, 0.06)]
}

/// Midpoint of the two legs' visible arc centroids seen from `(sx, sy)`.
pub fn leg_pair_truth(sx: f64, sy: f64, legs: &[(f64, f64, f64); 2]) -> (f64, f64) {
    let a = visible_arc_centroid(sx, sy, legs[0]);
    let b = visible_arc_centroid(sx, sy, legs[1]);
    ((a.0 + b.0) / 2.0, (a.1 + b.1) / 2.0)
}

/// Outcome of comparing one beam against the marching oracle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BeamCheck {
    Agree,
    /// The traversal hit a cell the oracle stepped over.
    CornerClip,
    Disagree,
}

/// Compares the grid traversal with the fine-marching oracle on one beam.
/// A disagreement is explained only when the traversal's hit cell is crossed
/// by a chord shorter than the oracle's step and the oracle did not report a
/// nearer return.
pub fn check_beam(map: &GridMap, x: f64, y: f64, heading: f64, max_range: f64) -> BeamCheck {
    let res = map.resolution();
    let step = res / 10.0;
    let got = cast_ray(map, x, y, heading, max_range);
    let want = march_ray(map, x, y, heading, max_range, step);
    match (got, want) {
        (None, None) => BeamCheck::Agree,
        (Some(a), Some(b)) if (a - b).abs() <= res => BeamCheck::Agree,
        (Some(a), oracle) if oracle.is_none_or(|b| b > a) => {
            let (s, c) = heading.sin_cos();
            let probe = a + 1e-9;
            let (ix, iy) = map.cell_index_of(x + probe * c, y + probe * s);
            let chord = cell_chord(map, x, y, heading, ix, iy);
            if map.occupied_at(ix, iy) == Some(true) && chord < step {
                BeamCheck::CornerClip
            } else {
                BeamCheck::Disagree
            }
        }
        _ => BeamCheck::Disagree,
    }
}

/// Tally of the ray caster agreement run.
#[derive(Debug, Default, Clone, Copy)]
pub struct RayTally {
    pub cases: usize,
    pub beams: usize,
    pub corner_clips: usize,
    pub disagreements: usize,
    pub bad_wire: usize,
}

/// Full scans from `cases` random poses on random block maps, each beam
/// checked against the oracle and each scan's JSON checked for finite,
/// in-range numbers.
pub fn ray_agreement(seed: u64, cases: usize) -> RayTally {
    let mut r = rng(seed);
    let params = ScanParams::default();
    let mut tally = RayTally::default();
    for _ in 0..cases {
        let (w, h) = (r.random_range(10..60), r.random_range(10..60));
        let blocks = r.random_range(0..12);
        let map = random_block_map(&mut r, w, h, blocks);
        let pose = random_free_pose(&mut r, &map);
        tally.cases += 1;
        for i in 0..params.beam_count {
            tally.beams += 1;
            match check_beam(&map, pose.x, pose.y, pose.theta + params.beam_angle(i), params.range_max) {
                BeamCheck::Agree => {}
                BeamCheck::CornerClip => tally.corner_clips += 1,
                BeamCheck::Disagree => tally.disagreements += 1,
            }
        }
        let scan = raycast_scan(&map, &pose, &params, false, 0.0).unwrap();
        if !wire_is_clean(&serde_json::to_value(&scan).unwrap(), &params) {
            tally.bad_wire += 1;
        }
    }
    tally
}

/// Every number in the serialized scan is finite and every range is null or
/// within the scanner limits.
pub fn wire_is_clean(v: &serde_json::Value, params: &ScanParams) -> bool {
    fn finite(v: &serde_json::Value) -> bool {
        match v {
            serde_json::Value::Number(n) => n.as_f64().is_some_and(f64::is_finite),
            serde_json::Value::Array(a) => a.iter().all(finite),
            serde_json::Value::Object(o) => o.values().all(finite),
            _ => true,
        }
    }
    let text = v.to_string();
    let ranges_ok = v["ranges"].as_array().is_some_and(|a| {
        a.len() == params.beam_count
            && a.iter().all(|x| x.is_null() || x.as_f64().is_some_and(|r| r >= params.range_min && r <= params.range_max))
    });
    finite(v) && ranges_ok && !text.contains("NaN") && !text.contains("inf")
}

/// Per-step record of the scripted localization run.
#[derive(Debug, Clone, Copy)]
pub struct MclStep {
    pub error: f64,
    pub weight_sum_error: f64,
}

/// Global localization on the hallway from a uniform 500-particle start:
/// 30 forward steps of 0.2 m with a gentle alternating turn.
pub fn hallway_localization(seed: u64) -> Vec<MclStep> {
    let map = load_map(HALLWAY).unwrap();
    let field = LikelihoodField::new(&map);
    let cfg = MclConfig::default();
    let mut truth = Pose2D::new(2.0, 1.0, 0.0);
    let mut belief = ParticleSet::uniform_free(&map, 500, seed);
    (0..30u64)
        .map(|k| {
            let delta = Pose2D::new(0.2, 0.0, if k % 10 < 5 { 0.03 } else { -0.03 });
            truth = truth.compose(&delta);
            let scan = raycast_scan(&map, &truth, &ScanParams::default(), false, k as f64 * 0.1).unwrap();
            belief = mcl_step(&belief, &delta, &scan, &field, &cfg, seed * 1000 + k).unwrap();
            let (m, _) = estimate_pose(&belief).unwrap();
            MclStep {
                error: m.distance_to(truth.x, truth.y),
                weight_sum_error: (belief.particles.iter().map(|p| p.weight).sum::<f64>() - 1.0).abs(),
            }
        })
        .collect()
}
