//! The per-tick robot pipeline and the scripted scenarios built on it.
//!
//! One tick: fault check, lidar and depth synthesis, localization, leg
//! detection, cost map from the known map plus live scan hits, plan from the
//! true pose, turn signal, pure-pursuit command, publish, then the physics
//! step.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::Serialize;
use thiserror::Error;

use crate::bridge::schema::{self, CostMapMsg, HumansMsg, PoseMsg};
use crate::bridge::{BridgeError, Bus};
use crate::geometry::{normalize_angle, Pose2D, Twist};
use crate::perception::{
    detect_humans, estimate_pose, mcl_step, update_costmap, voxel_downsample, CostMap, LegParams, LikelihoodField, MclConfig,
    ParticleSet, PerceptionError,
};
use crate::planning::{lookahead_point, obstacle_side, plan_path_with, turn_signal, Path, Plan, PlanError, PlannerConfig, Side, Signal, TurnSignal};
use crate::viz::{self, Layer, MarkerFrame};
use crate::world::{load_map, raycast_scan, step, synth_pointcloud, CameraParams, FaultSpec, GridMap, ScanParams, SimConfig, SimState};

pub const HALLWAY: &str = include_str!("../maps/hallway.txt");
pub const HALLWAY_BUILDING: &str = include_str!("../maps/hallway_building.txt");
pub const INTENT_ROOM: &str = include_str!("../maps/intent_room.txt");

/// Consecutive ticks a signal must hold to count as sustained.
pub const SUSTAIN_TICKS: usize = 10;

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("unknown scenario {0:?}")]
    UnknownScenario(String),
    #[error(transparent)]
    World(#[from] crate::world::WorldError),
    #[error(transparent)]
    Map(#[from] crate::world::MapError),
    #[error(transparent)]
    Perception(#[from] PerceptionError),
    #[error(transparent)]
    Bridge(#[from] BridgeError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ScenarioName {
    HallwayOk,
    HallwayFault,
    IntentLeft,
    IntentRight,
}

impl ScenarioName {
    pub const ALL: [ScenarioName; 4] = [Self::HallwayOk, Self::HallwayFault, Self::IntentLeft, Self::IntentRight];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::HallwayOk => "hallway-ok",
            Self::HallwayFault => "hallway-fault",
            Self::IntentLeft => "intent-left",
            Self::IntentRight => "intent-right",
        }
    }
}

impl fmt::Display for ScenarioName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ScenarioName {
    type Err = ScenarioError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|n| n.as_str() == s)
            .ok_or_else(|| ScenarioError::UnknownScenario(s.into()))
    }
}

/// Tunables of the per-tick pipeline.
#[derive(Debug, Clone)]
pub struct PipelineConfig {
    pub dt: f64,
    pub scan: ScanParams,
    pub camera: CameraParams,
    pub voxel_leaf: f64,
    pub mcl: MclConfig,
    pub particles: usize,
    pub legs: LegParams,
    pub inflation_radius: f64,
    pub planner: PlannerConfig,
    pub sim: SimConfig,
    /// Pure-pursuit cruise speed, m/s.
    pub cruise_speed: f64,
    pub pursuit_lookahead: f64,
    pub signal_lookahead: f64,
    pub signal_dead_band: f64,
    pub goal_tolerance: f64,
    pub path_marker_spacing: f64,
    pub costmap_emit_threshold: f64,
    pub clear_ring_radius: f64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            dt: 0.1,
            scan: ScanParams::default(),
            camera: CameraParams::default(),
            voxel_leaf: 0.1,
            mcl: MclConfig::default(),
            particles: ParticleSet::DEFAULT_COUNT,
            legs: LegParams::default(),
            inflation_radius: 0.6,
            planner: PlannerConfig::default(),
            sim: SimConfig::default(),
            cruise_speed: 0.5,
            pursuit_lookahead: 0.6,
            signal_lookahead: 1.0,
            signal_dead_band: 0.15,
            goal_tolerance: 0.25,
            path_marker_spacing: 0.25,
            costmap_emit_threshold: 0.05,
            clear_ring_radius: 1.0,
        }
    }
}

/// What one tick produced.
#[derive(Debug, Clone)]
pub struct TickOutput {
    pub t: f64,
    pub pose: Pose2D,
    pub estimate: Pose2D,
    pub lidar_faulted: bool,
    pub scan_markers: usize,
    pub plan: Option<Plan>,
    /// Why no plan exists while a goal is set.
    pub plan_error: Option<PlanError>,
    pub signal: Option<Signal>,
    pub detections: usize,
    pub collided: bool,
    pub goal_reached: bool,
}

/// Simulator plus the perception and planning stack, advanced one tick at a
/// time.
#[derive(Debug)]
pub struct Pipeline {
    pub cfg: PipelineConfig,
    known: GridMap,
    field: LikelihoodField,
    state: SimState,
    belief: ParticleSet,
    goal: Option<(f64, f64)>,
    seed: u64,
    tick: u64,
    goal_reached: bool,
}

impl Pipeline {
    /// `truth` is what the sensors see; `known` is the map the robot
    /// localizes and plans against.
    pub fn new(truth: GridMap, known: GridMap, start: Pose2D, seed: u64, cfg: PipelineConfig) -> Self {
        let field = LikelihoodField::new(&known);
        let belief = ParticleSet::around(start, 0.2, 0.1, cfg.particles, seed);
        Self {
            cfg,
            known,
            field,
            state: SimState::new(Arc::new(truth), start),
            belief,
            goal: None,
            seed,
            tick: 0,
            goal_reached: false,
        }
    }

    pub fn set_goal(&mut self, goal: Option<(f64, f64)>) {
        self.goal = goal;
        self.goal_reached = false;
    }

    pub fn goal(&self) -> Option<(f64, f64)> {
        self.goal
    }

    pub fn add_fault(&mut self, f: FaultSpec) {
        self.state.faults.push(f);
    }

    pub fn state(&self) -> &SimState {
        &self.state
    }

    pub fn belief(&self) -> &ParticleSet {
        &self.belief
    }

    pub fn known_map(&self) -> &GridMap {
        &self.known
    }

    fn pursue(&self, path: &Path, pose: &Pose2D) -> Twist {
        let Ok((tx, ty)) = lookahead_point(path, pose, self.cfg.pursuit_lookahead) else {
            return Twist::default();
        };
        let alpha = normalize_angle((ty - pose.y).atan2(tx - pose.x) - pose.theta);
        if alpha.abs() > std::f64::consts::FRAC_PI_2 {
            return Twist::new(0.0, self.cfg.sim.w_max.copysign(alpha));
        }
        let v = self.cfg.cruise_speed;
        Twist::new(v, 2.0 * v * alpha.sin() / self.cfg.pursuit_lookahead)
    }

    /// Runs one tick, publishing every data product on `bus` when given.
    pub fn tick(&mut self, bus: Option<&Bus>) -> Result<TickOutput, ScenarioError> {
        let cfg = &self.cfg;
        let t = self.state.clock;
        let pose = self.state.true_pose;
        let faulted = self.state.lidar_faulted();

        let scan = raycast_scan(&self.state.map, &pose, &cfg.scan, faulted, t)?;
        let cloud = voxel_downsample(&synth_pointcloud(&self.state.map, &pose, &cfg.camera, t)?, cfg.voxel_leaf)?;

        let humans = detect_humans(&scan, &cfg.legs);
        let cost = update_costmap(&self.known, &scan, &pose, cfg.inflation_radius)?;

        let at_goal = self
            .goal
            .is_some_and(|(gx, gy)| pose.distance_to(gx, gy) < cfg.goal_tolerance);
        self.goal_reached |= at_goal;
        let planned = match self.goal {
            Some(g) if !self.goal_reached => Some(plan_path_with(&cost, pose, g, &cfg.planner).map(|mut p| {
                p.path.stamp = t;
                p
            })),
            _ => None,
        };
        let (plan, plan_error) = match planned {
            Some(Ok(p)) => (Some(p), None),
            Some(Err(e)) => (None, Some(e)),
            None => (None, None),
        };
        let signal = plan
            .as_ref()
            .and_then(|p| turn_signal(&p.path, &pose, cfg.signal_lookahead, cfg.signal_dead_band).ok());

        let cmd = match &plan {
            Some(p) if !self.state.collided => self.pursue(&p.path, &pose),
            _ => Twist::default(),
        };

        let scan_markers = viz::encode_scan(&scan, &pose);
        let out = TickOutput {
            t,
            pose,
            estimate: estimate_pose(&self.belief).map(|e| e.0).unwrap_or(pose),
            lidar_faulted: faulted,
            scan_markers: scan_markers.len(),
            plan: plan.clone(),
            plan_error,
            signal: signal.map(|s| s.value),
            detections: humans.len(),
            collided: self.state.collided,
            goal_reached: self.goal_reached,
        };

        if let Some(bus) = bus {
            bus.set_time(t);
            let frame = |layer, markers| MarkerFrame { stamp: t, layer, markers };
            bus.publish_msg(schema::T_SCAN, schema::LASER_SCAN, &scan)?;
            bus.publish_msg(&schema::marker_topic(Layer::Scan), schema::MARKER_FRAME, &frame(Layer::Scan, scan_markers))?;
            bus.publish_msg(schema::T_POINTCLOUD, schema::POINT_CLOUD, &cloud)?;
            bus.publish_msg(
                &schema::marker_topic(Layer::Pointcloud),
                schema::MARKER_FRAME,
                &frame(Layer::Pointcloud, viz::encode_pointcloud(&cloud)),
            )?;
            bus.publish_msg(schema::T_PARTICLES, schema::PARTICLE_SET, &self.belief)?;
            bus.publish_msg(
                &schema::marker_topic(Layer::Particles),
                schema::MARKER_FRAME,
                &frame(Layer::Particles, viz::encode_particles(&self.belief)),
            )?;
            bus.publish_msg(schema::T_POSE, schema::POSE, &PoseMsg::new(t, &out.estimate))?;
            let dets = HumansMsg { stamp: t, detections: humans.clone() };
            bus.publish_msg(schema::T_HUMANS, schema::HUMANS, &dets)?;
            bus.publish_msg(&schema::marker_topic(Layer::Humans), schema::MARKER_FRAME, &frame(Layer::Humans, viz::encode_humans(&humans)))?;
            bus.publish_msg(schema::T_COSTMAP, schema::COST_MAP, &CostMapMsg::new(t, &cost))?;
            bus.publish_msg(
                &schema::marker_topic(Layer::Costmap),
                schema::MARKER_FRAME,
                &frame(Layer::Costmap, costmap_markers(&cost, cfg, &pose)),
            )?;
            let path = plan.as_ref().map(|p| p.path.clone()).unwrap_or_else(|| Path::empty(t, self.goal.unwrap_or((pose.x, pose.y))));
            bus.publish_msg(schema::T_PLAN, schema::PATH, &path)?;
            let path_markers = viz::encode_path(&path, cfg.path_marker_spacing).unwrap_or_default();
            bus.publish_msg(&schema::marker_topic(Layer::Path), schema::MARKER_FRAME, &frame(Layer::Path, path_markers))?;
            let sig = TurnSignal {
                value: signal.map_or(Signal::Straight, |s| s.value),
                stamp: t,
            };
            bus.publish_msg(schema::T_TURN_SIGNAL, schema::TURN_SIGNAL, &sig)?;
            bus.publish_msg(&schema::marker_topic(Layer::Signal), schema::MARKER_FRAME, &frame(Layer::Signal, viz::encode_signal(&sig)))?;
        }

        // localization update for the motion about to happen is applied next tick
        let next = step(&self.state, cmd, cfg.dt, &cfg.sim)?;
        let odom = next.true_pose.relative_to(&self.state.true_pose);
        let seed = self.seed.wrapping_mul(1_000_003).wrapping_add(self.tick);
        self.belief = match mcl_step(&self.belief, &odom, &scan, &self.field, &cfg.mcl, seed) {
            Ok(b) => b,
            Err(PerceptionError::AllZeroWeights { recovered }) => recovered,
            Err(e) => return Err(e.into()),
        };
        self.state = next;
        self.tick += 1;
        Ok(out)
    }
}

fn costmap_markers(cost: &CostMap, cfg: &PipelineConfig, pose: &Pose2D) -> Vec<viz::Marker> {
    viz::encode_costmap_with_clear(cost, cfg.costmap_emit_threshold, pose, cfg.clear_ring_radius)
}

/// A scripted run: maps, start, goal, faults and stop rule.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub name: ScenarioName,
    pub truth: GridMap,
    pub known: GridMap,
    pub start: Pose2D,
    pub goal: (f64, f64),
    pub faults: Vec<FaultSpec>,
    /// Obstacle whose passing side the robot must signal.
    pub obstacle: Option<(f64, f64)>,
    /// The run ends once the robot's x passes this value.
    pub stop_x: Option<f64>,
    pub max_time: f64,
}

/// LIDAR blackout window of the hallway-fault run, sim seconds.
pub const HALLWAY_FAULT_WINDOW: (f64, f64) = (10.0, 14.5);

impl Scenario {
    pub fn build(name: ScenarioName) -> Result<Self, ScenarioError> {
        Ok(match name {
            ScenarioName::HallwayOk | ScenarioName::HallwayFault => {
                let faults = if name == ScenarioName::HallwayFault {
                    vec![FaultSpec::lidar_blackout(HALLWAY_FAULT_WINDOW.0, HALLWAY_FAULT_WINDOW.1)?]
                } else {
                    Vec::new()
                };
                Self {
                    name,
                    truth: load_map(HALLWAY)?,
                    known: load_map(HALLWAY_BUILDING)?,
                    start: Pose2D::new(2.0, 1.2, 0.0),
                    goal: (14.0, 1.2),
                    faults,
                    obstacle: None,
                    stop_x: None,
                    max_time: 120.0,
                }
            }
            ScenarioName::IntentLeft | ScenarioName::IntentRight => {
                let room = load_map(INTENT_ROOM)?;
                let s = Self {
                    name: ScenarioName::IntentLeft,
                    truth: room.clone(),
                    known: room,
                    start: Pose2D::new(1.125, 0.125, 0.0),
                    goal: (8.875, 0.125),
                    faults: Vec::new(),
                    obstacle: Some((5.0, -0.25)),
                    stop_x: Some(5.0),
                    max_time: 60.0,
                };
                if name == ScenarioName::IntentRight {
                    s.mirrored()
                } else {
                    s
                }
            }
        })
    }

    /// The same run reflected across the x axis.
    pub fn mirrored(&self) -> Self {
        let name = match self.name {
            ScenarioName::IntentLeft => ScenarioName::IntentRight,
            ScenarioName::IntentRight => ScenarioName::IntentLeft,
            n => n,
        };
        Self {
            name,
            truth: self.truth.mirrored(),
            known: self.known.mirrored(),
            start: self.start.mirrored(),
            goal: (self.goal.0, -self.goal.1),
            faults: self.faults.clone(),
            obstacle: self.obstacle.map(|(x, y)| (x, -y)),
            stop_x: self.stop_x,
            max_time: self.max_time,
        }
    }

    pub fn run(&self, seed: u64, bus: Option<&Bus>) -> Result<ScenarioReport, ScenarioError> {
        self.run_with(seed, PipelineConfig::default(), bus)
    }

    pub fn run_with(&self, seed: u64, cfg: PipelineConfig, bus: Option<&Bus>) -> Result<ScenarioReport, ScenarioError> {
        let dt = cfg.dt;
        let mut p = Pipeline::new(self.truth.clone(), self.known.clone(), self.start, seed, cfg);
        p.set_goal(Some(self.goal));
        for f in &self.faults {
            p.add_fault(*f);
        }
        let mut r = ScenarioReport {
            scenario: self.name.to_string(),
            seed,
            ..ScenarioReport::default()
        };
        let max_ticks = (self.max_time / dt).round() as usize;
        let mut first_side = None;
        for _ in 0..=max_ticks {
            let o = p.tick(bus)?;
            r.ticks += 1;
            r.sim_time = o.t;
            r.path_cost_series.push(o.plan.as_ref().map(|pl| pl.cost()));
            r.plan_poses.push(o.plan.as_ref().map_or(0, |pl| pl.path.poses.len()));
            r.signal_series.push(o.signal.unwrap_or(Signal::Straight));
            r.detections.push(o.detections);
            r.scan_markers.push(o.scan_markers);
            r.lidar_faulted.push(o.lidar_faulted);
            r.localization_error.push(o.estimate.distance_to(o.pose.x, o.pose.y));
            if let (None, Some(obs), Some(pl)) = (first_side, self.obstacle, o.plan.as_ref()) {
                first_side = obstacle_side(&pl.path, obs).ok();
            }
            r.final_pose = o.pose;
            r.collided = o.collided;
            if o.goal_reached {
                r.goal_reached = true;
                break;
            }
            if o.collided && !o.lidar_faulted {
                break;
            }
            if self.stop_x.is_some_and(|x| o.pose.x >= x) {
                break;
            }
        }
        r.obstacle_side = first_side;
        r.collided = p.state().collided;
        r.announced_signal = first_sustained(&r.signal_series, SUSTAIN_TICKS);
        Ok(r)
    }
}

/// Machine-readable summary of a scenario run. Series hold one entry per tick.
#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct ScenarioReport {
    pub scenario: String,
    pub seed: u64,
    pub ticks: usize,
    pub sim_time: f64,
    pub collided: bool,
    pub goal_reached: bool,
    pub final_pose: Pose2D,
    /// Plan cost from the current pose; `null` when no plan exists.
    pub path_cost_series: Vec<Option<f64>>,
    pub signal_series: Vec<Signal>,
    /// Human detections per tick.
    pub detections: Vec<usize>,
    pub scan_markers: Vec<usize>,
    pub plan_poses: Vec<usize>,
    pub lidar_faulted: Vec<bool>,
    pub localization_error: Vec<f64>,
    /// Side of the first plan that passes within reach of the obstacle.
    pub obstacle_side: Option<Side>,
    /// First non-straight signal held for the sustain count: the intent the
    /// robot announced on approach.
    pub announced_signal: Option<Signal>,
}

impl ScenarioReport {
    /// Lowest plan cost over ticks where `keep` holds.
    pub fn min_cost_where(&self, keep: impl Fn(usize) -> bool) -> Option<f64> {
        self.path_cost_series
            .iter()
            .enumerate()
            .filter(|(i, _)| keep(*i))
            .filter_map(|(_, c)| *c)
            .min_by(f64::total_cmp)
    }

    pub fn fault_ticks(&self) -> impl Iterator<Item = usize> + '_ {
        self.lidar_faulted.iter().enumerate().filter(|(_, f)| **f).map(|(i, _)| i)
    }

    /// Longest run of consecutive ticks holding `s`.
    pub fn longest_run(&self, s: Signal) -> usize {
        let mut best = 0;
        let mut cur = 0;
        for v in &self.signal_series {
            cur = if *v == s { cur + 1 } else { 0 };
            best = best.max(cur);
        }
        best
    }

    pub fn to_json(&self) -> String {
        crate::bridge::protocol::canonical_json(&serde_json::to_value(self).unwrap_or_default())
    }
}

/// Checks a report against its scenario's expected outcome. `reference` is
/// the hallway-ok report for the same seed, needed by hallway-fault. Returns
/// the failed checks.
pub fn assess(r: &ScenarioReport, reference: Option<&ScenarioReport>) -> Vec<String> {
    let mut fails = Vec::new();
    let mut check = |ok: bool, what: &str| {
        if !ok {
            fails.push(what.to_owned());
        }
    };
    match r.scenario.parse::<ScenarioName>() {
        Ok(ScenarioName::HallwayOk) => {
            check(!r.collided, "robot collided");
            check(r.goal_reached && r.sim_time <= 120.0, "goal not reached within 120 s");
        }
        Ok(ScenarioName::HallwayFault) => {
            check(r.collided, "robot did not collide");
            check(
                (0..r.ticks).any(|i| r.scan_markers[i] == 0 && r.plan_poses[i] > 0),
                "no tick with empty scan markers and a non-empty plan",
            );
            let window: Vec<usize> = r.fault_ticks().collect();
            let ours = r.min_cost_where(|i| window.contains(&i));
            let theirs = reference.and_then(|o| o.min_cost_where(|i| window.contains(&i)));
            check(
                matches!((ours, theirs), (Some(a), Some(b)) if a < b),
                "fault-window plan cost not below the functioning run",
            );
        }
        Ok(n @ (ScenarioName::IntentLeft | ScenarioName::IntentRight)) => {
            let (sig, side) = if n == ScenarioName::IntentLeft {
                (Signal::Left, Side::Left)
            } else {
                (Signal::Right, Side::Right)
            };
            check(r.announced_signal == Some(sig) && r.longest_run(sig) >= SUSTAIN_TICKS, "no sustained signal toward the named side");
            check(r.obstacle_side == Some(side), "obstacle passed on the wrong side");
            check(!r.collided, "robot collided");
        }
        Err(_) => check(false, "unknown scenario"),
    }
    fails
}

fn first_sustained(series: &[Signal], n: usize) -> Option<Signal> {
    let mut run = 0;
    for (i, s) in series.iter().enumerate() {
        run = if i > 0 && series[i - 1] == *s { run + 1 } else { 1 };
        if run >= n && *s != Signal::Straight {
            return Some(*s);
        }
    }
    None
}
