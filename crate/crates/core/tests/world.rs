mod common;

use std::sync::Arc;

use clearbot::scenario::HALLWAY;
use clearbot::world::{
    footprint_collides, load_map, raycast_scan, step, synth_pointcloud, CameraParams, FaultSpec, ScanParams, SimConfig,
    SimState,
};
use clearbot::{Pose2D, Twist};
use common::BeamCheck;
use proptest::prelude::*;

#[test]
fn ray_caster_agrees_with_marching_oracle() {
    let t = common::ray_agreement(7, 1000);
    assert_eq!(t.cases, 1000);
    assert_eq!(t.disagreements, 0, "{t:?}");
    assert_eq!(t.bad_wire, 0, "{t:?}");
    // corner clips are rare
    assert!((t.corner_clips as f64) < 0.01 * t.beams as f64, "{t:?}");
}

#[test]
fn axis_aligned_beams_match_exactly() {
    let map = load_map(HALLWAY).unwrap();
    let pose = Pose2D::new(2.05, 1.05, 0.0);
    for heading in [0.0, std::f64::consts::FRAC_PI_2, std::f64::consts::PI, -std::f64::consts::FRAC_PI_2] {
        assert_eq!(common::check_beam(&map, pose.x, pose.y, heading, 12.0), BeamCheck::Agree);
    }
}

#[test]
fn blackout_empties_every_beam() {
    let map = load_map(HALLWAY).unwrap();
    let pose = Pose2D::new(2.0, 1.2, 0.3);
    let ok = raycast_scan(&map, &pose, &ScanParams::default(), false, 1.0).unwrap();
    let bad = raycast_scan(&map, &pose, &ScanParams::default(), true, 1.0).unwrap();
    assert!(ok.return_count() > 300);
    assert_eq!(bad.return_count(), 0);
    assert_eq!(bad.ranges.len(), ok.ranges.len());
    let v = serde_json::to_value(&bad).unwrap();
    assert!(v["ranges"].as_array().unwrap().iter().all(|r| r.is_null()));
}

#[test]
fn fault_window_is_half_open_union() {
    let faults = [FaultSpec::lidar_blackout(10.0, 20.0).unwrap(), FaultSpec::lidar_blackout(15.0, 30.0).unwrap()];
    let mut s = SimState::new(Arc::new(load_map(HALLWAY).unwrap()), Pose2D::new(2.0, 1.2, 0.0));
    s.faults = faults.to_vec();
    for (t, want) in [(9.99, false), (10.0, true), (25.0, true), (30.0, false)] {
        s.clock = t;
        assert_eq!(s.lidar_faulted(), want, "{t}");
    }
}

#[test]
fn point_cloud_lies_on_walls() {
    let map = load_map(HALLWAY).unwrap();
    let cam = CameraParams::default();
    let pose = Pose2D::new(3.0, 1.2, 0.2);
    let cloud = synth_pointcloud(&map, &pose, &cam, 0.0).unwrap();
    assert!(!cloud.points.is_empty());
    assert_eq!(cloud.points.len() % cam.heights.len(), 0);
    let res = map.resolution();
    for p in &cloud.points {
        assert!(p.iter().all(|v| v.is_finite()));
        // each hit sits on the boundary of an occupied cell
        let near = [(-1e-6, -1e-6), (1e-6, -1e-6), (-1e-6, 1e-6), (1e-6, 1e-6)]
            .iter()
            .any(|(ex, ey)| map.cell_of(p[0] + ex, p[1] + ey).is_some_and(|(cx, cy)| map.is_occupied(cx, cy)));
        assert!(near, "{p:?}");
        assert!(pose.distance_to(p[0], p[1]) <= cam.range_max + res);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn scan_ranges_stay_in_limits(seed in any::<u64>()) {
        let mut r = common::rng(seed);
        let map = common::random_block_map(&mut r, 40, 30, 8);
        let pose = common::random_free_pose(&mut r, &map);
        let params = ScanParams::default();
        let scan = raycast_scan(&map, &pose, &params, false, 0.0).unwrap();
        prop_assert_eq!(scan.ranges.len(), params.beam_count);
        for x in scan.ranges.iter().flatten() {
            prop_assert!(x.is_finite() && *x >= params.range_min && *x <= params.range_max);
        }
        prop_assert!(common::wire_is_clean(&serde_json::to_value(&scan).unwrap(), &params));
    }

    #[test]
    fn collision_latches_and_robot_never_overlaps(seed in any::<u64>(), cmds in prop::collection::vec((-1.5f64..1.5, -3.0f64..3.0), 1..60)) {
        let mut r = common::rng(seed);
        let map = Arc::new(common::random_block_map(&mut r, 30, 30, 10));
        let cfg = SimConfig::default();
        let start = loop {
            let p = common::random_free_pose(&mut r, &map);
            if !footprint_collides(&map, p.x, p.y, cfg.robot_radius) {
                break p;
            }
        };
        let mut s = SimState::new(map.clone(), start);
        let mut was = false;
        for (v, w) in cmds {
            s = step(&s, Twist::new(v, w), 0.1, &cfg).unwrap();
            prop_assert!(!footprint_collides(&map, s.true_pose.x, s.true_pose.y, cfg.robot_radius));
            prop_assert!(!was || s.collided);
            was = s.collided;
        }
    }
}
