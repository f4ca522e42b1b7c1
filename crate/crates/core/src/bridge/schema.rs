//! Topic names, schema names and the JSON payload shapes carried on them.

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::geometry::Pose2D;
use crate::perception::{CostMap, HumanDetection, ParticleSet};
use crate::planning::{Path, TurnSignal};
use crate::viz::{Layer, MarkerFrame};
use crate::world::{FaultSpec, LaserScan, PointCloud};

pub const LASER_SCAN: &str = "clearbot/LaserScan";
pub const PARTICLE_SET: &str = "clearbot/ParticleSet";
pub const HUMANS: &str = "clearbot/Humans";
pub const COST_MAP: &str = "clearbot/CostMap";
pub const PATH: &str = "clearbot/Path";
pub const TURN_SIGNAL: &str = "clearbot/TurnSignal";
pub const POINT_CLOUD: &str = "clearbot/PointCloud";
pub const POSE: &str = "clearbot/Pose";
pub const MARKER_FRAME: &str = "clearbot/MarkerFrame";
pub const GOAL: &str = "clearbot/Goal";
pub const FAULT: &str = "clearbot/Fault";
pub const STATUS: &str = "clearbot/Status";

pub const T_SCAN: &str = "/scan";
pub const T_PARTICLES: &str = "/particles";
pub const T_HUMANS: &str = "/humans";
pub const T_COSTMAP: &str = "/costmap";
pub const T_PLAN: &str = "/plan";
pub const T_TURN_SIGNAL: &str = "/turn_signal";
pub const T_POINTCLOUD: &str = "/pointcloud";
pub const T_POSE: &str = "/pose";
pub const T_GOAL: &str = "/goal";
pub const T_FAULT: &str = "/fault";
pub const T_STATUS: &str = "/status";

pub fn marker_topic(layer: Layer) -> String {
    format!("/markers/{}", layer.name())
}

/// Every standard topic with its schema.
pub fn standard_topics() -> Vec<(String, &'static str)> {
    let mut t: Vec<(String, &'static str)> = [
        (T_SCAN, LASER_SCAN),
        (T_PARTICLES, PARTICLE_SET),
        (T_HUMANS, HUMANS),
        (T_COSTMAP, COST_MAP),
        (T_PLAN, PATH),
        (T_TURN_SIGNAL, TURN_SIGNAL),
        (T_POINTCLOUD, POINT_CLOUD),
        (T_POSE, POSE),
        (T_GOAL, GOAL),
        (T_FAULT, FAULT),
        (T_STATUS, STATUS),
    ]
    .into_iter()
    .map(|(n, s)| (n.to_string(), s))
    .collect();
    t.extend(Layer::ALL.iter().map(|l| (marker_topic(*l), MARKER_FRAME)));
    t
}

/// Topics a client may publish to on a live server.
pub const CLIENT_WRITABLE: [&str; 2] = [T_GOAL, T_FAULT];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HumansMsg {
    pub stamp: f64,
    pub detections: Vec<HumanDetection>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PoseMsg {
    pub stamp: f64,
    pub x: f64,
    pub y: f64,
    pub theta: f64,
}

impl PoseMsg {
    pub fn new(stamp: f64, p: &Pose2D) -> Self {
        Self {
            stamp,
            x: p.x,
            y: p.y,
            theta: p.theta,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CostMapMsg {
    pub stamp: f64,
    pub width: usize,
    pub height: usize,
    pub resolution: f64,
    pub origin: Pose2D,
    /// Row-major from the bottom-left cell.
    pub cells: Vec<f64>,
}

impl CostMapMsg {
    pub fn new(stamp: f64, c: &CostMap) -> Self {
        Self {
            stamp,
            width: c.width(),
            height: c.height(),
            resolution: c.resolution(),
            origin: c.origin(),
            cells: c.cells().to_vec(),
        }
    }
}

/// Navigation goal sent by a client.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GoalMsg {
    pub x: f64,
    pub y: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Live,
    Replay,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatusMsg {
    pub stamp: f64,
    pub mode: Mode,
    pub sessions: usize,
    /// Frames dropped from full session outboxes since start.
    pub dropped: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub message: Option<String>,
}

fn parses<T: DeserializeOwned>(v: &Value) -> Option<T> {
    serde_json::from_value(v.clone()).ok()
}

/// Whether `payload` is a well-formed instance of `schema`. Unknown schema
/// names accept any JSON object.
pub fn payload_matches(schema: &str, payload: &Value) -> bool {
    let finite = |xs: &[f64]| xs.iter().all(|x| x.is_finite());
    match schema {
        LASER_SCAN => parses::<LaserScan>(payload).is_some(),
        PARTICLE_SET => parses::<ParticleSet>(payload).is_some(),
        HUMANS => parses::<HumansMsg>(payload).is_some(),
        COST_MAP => parses::<CostMapMsg>(payload).is_some_and(|c| c.cells.len() == c.width * c.height),
        PATH => parses::<Path>(payload).is_some(),
        TURN_SIGNAL => parses::<TurnSignal>(payload).is_some(),
        POINT_CLOUD => parses::<PointCloud>(payload).is_some(),
        POSE => parses::<PoseMsg>(payload).is_some(),
        MARKER_FRAME => parses::<MarkerFrame>(payload).is_some(),
        GOAL => parses::<GoalMsg>(payload).is_some_and(|g| finite(&[g.x, g.y])),
        FAULT => parses::<FaultSpec>(payload).is_some_and(|f| FaultSpec::new(f.kind, f.t_start, f.t_end).is_ok()),
        STATUS => parses::<StatusMsg>(payload).is_some(),
        _ => payload.is_object(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::world::ScanParams;
    use serde_json::json;

    #[test]
    fn standard_set_is_complete_and_unique() {
        let t = standard_topics();
        let mut names: Vec<&str> = t.iter().map(|(n, _)| n.as_str()).collect();
        names.sort();
        names.dedup();
        assert_eq!(names.len(), t.len());
        for n in ["/scan", "/particles", "/humans", "/costmap", "/plan", "/turn_signal", "/pointcloud", "/pose", "/goal", "/fault", "/status", "/markers/scan", "/markers/signal"] {
            assert!(names.contains(&n), "{n}");
        }
    }

    #[test]
    fn scan_wire_shape() {
        let mut scan = LaserScan::blank(1.0, Pose2D::new(1.0, 2.0, 0.5), &ScanParams::default());
        scan.ranges[0] = Some(2.5);
        let v = serde_json::to_value(&scan).unwrap();
        assert_eq!(v["pose"], json!({"x": 1.0, "y": 2.0, "theta": 0.5}));
        assert_eq!(v["ranges"][0], json!(2.5));
        assert_eq!(v["ranges"][1], Value::Null);
        assert!(payload_matches(LASER_SCAN, &v));
    }

    #[test]
    fn goal_and_fault_validation() {
        assert!(payload_matches(GOAL, &json!({"x": 1.0, "y": 2})));
        assert!(!payload_matches(GOAL, &json!({"x": 1.0})));
        assert!(!payload_matches(GOAL, &json!({"x": 1.0, "y": 2, "z": 3})));
        assert!(payload_matches(FAULT, &json!({"kind": "lidar_blackout", "t_start": 1.0, "t_end": 2.0})));
        assert!(!payload_matches(FAULT, &json!({"kind": "lidar_blackout", "t_start": 2.0, "t_end": 1.0})));
        assert!(!payload_matches(FAULT, &json!({"kind": "wheel_slip", "t_start": 1.0, "t_end": 2.0})));
    }

    #[test]
    fn particle_wire_shape() {
        let set = ParticleSet::from_poses(vec![Pose2D::new(1.0, 2.0, 0.0)], 3.0);
        let v = serde_json::to_value(&set).unwrap();
        assert_eq!(v, json!({"particles": [{"x": 1.0, "y": 2.0, "theta": 0.0, "weight": 1.0}], "stamp": 3.0}));
        assert!(payload_matches(PARTICLE_SET, &v));
        assert!(!payload_matches(PARTICLE_SET, &json!({"stamp": 1})));
    }
}
