use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Duration;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use clearbot::bridge::schema::{self, GoalMsg, StatusMsg, T_FAULT, T_GOAL, T_STATUS};
use clearbot::bridge::{loopback, serve, Bus, Mode, Outbox};
use clearbot::scenario::{assess, Pipeline, PipelineConfig, Scenario, ScenarioName};
use clearbot::session_log::{replay, LogHeader, Recorder, SessionLog};
use clearbot::world::{footprint_collides, load_map, FaultSpec, GridMap, SimConfig};
use clearbot::Pose2D;

const DEFAULT_PORT: u16 = 9090;

#[derive(Parser)]
#[command(name = "clearbot", version, about = "Simulated robot with a live JSON/WebSocket telemetry bridge")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the live simulation and serve it on ws://127.0.0.1:PORT/bridge.
    Run {
        /// Ground-truth map (ascii grid).
        #[arg(long)]
        map: PathBuf,
        /// Map the robot plans against; defaults to the ground truth.
        #[arg(long)]
        known: Option<PathBuf>,
        #[arg(long, env = "CLEARBOT_PORT", default_value_t = DEFAULT_PORT)]
        port: u16,
        /// Ticks per wall-clock second.
        #[arg(long, default_value_t = 10.0)]
        rate: f64,
        /// Write every published frame to this session log
        #[arg(long)]
        record: Option<PathBuf>,
        /// LIDAR blackout as `lidar:T0:T1` in sim seconds; repeatable.
        #[arg(long, value_parser = parse_fault)]
        fault: Vec<FaultSpec>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Start pose `x,y,theta`; defaults to the first free cell.
        #[arg(long, value_parser = parse_pose)]
        start: Option<Pose2D>,
        /// Initial goal `x,y`.
        #[arg(long, value_parser = parse_goal)]
        goal: Option<(f64, f64)>,
        /// Stop after this many sim seconds instead of running until Ctrl-C.
        #[arg(long)]
        duration: Option<f64>,
    },
    /// Run a scripted scenario and report on it.
    Scenario {
        /// hallway-ok, hallway-fault, intent-left or intent-right.
        name: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Print the full JSON report on stdout.
        #[arg(long)]
        json: bool,
        /// Write every published frame to this session log
        #[arg(long)]
        record: Option<PathBuf>,
    },
    /// Replay a recorded session onto the bridge.
    Replay {
        /// Session log written by `--record`
        #[arg(long)]
        log: PathBuf,
        /// Time multiplier; `inf` replays without delay.
        #[arg(long, default_value_t = 1.0)]
        speed: f64,
        #[arg(long, env = "CLEARBOT_PORT", default_value_t = DEFAULT_PORT)]
        port: u16,
        /// Keep serving after the log ends until Ctrl-C.
        #[arg(long)]
        hold: bool,
    },
}

fn parse_floats(s: &str, n: usize) -> Result<Vec<f64>, String> {
    let v: Vec<f64> = s
        .split(',')
        .map(|p| p.trim().parse::<f64>().map_err(|e| format!("{p:?}: {e}")))
        .collect::<Result<_, _>>()?;
    if v.len() != n || v.iter().any(|x| !x.is_finite()) {
        return Err(format!("expected {n} finite comma-separated numbers"));
    }
    Ok(v)
}

fn parse_pose(s: &str) -> Result<Pose2D, String> {
    let v = parse_floats(s, 3)?;
    Ok(Pose2D::new(v[0], v[1], v[2]))
}

fn parse_goal(s: &str) -> Result<(f64, f64), String> {
    let v = parse_floats(s, 2)?;
    Ok((v[0], v[1]))
}

fn parse_fault(s: &str) -> Result<FaultSpec, String> {
    let mut parts = s.split(':');
    let (Some("lidar"), Some(a), Some(b), None) = (parts.next(), parts.next(), parts.next(), parts.next()) else {
        return Err("expected lidar:T0:T1".into());
    };
    let t0 = a.parse::<f64>().map_err(|e| e.to_string())?;
    let t1 = b.parse::<f64>().map_err(|e| e.to_string())?;
    FaultSpec::lidar_blackout(t0, t1).map_err(|e| e.to_string())
}

fn read_map(path: &PathBuf) -> Result<GridMap> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    load_map(&text).with_context(|| format!("parsing {}", path.display()))
}

/// Centre of the first cell, bottom-up, where the robot footprint fits.
fn first_free_pose(map: &GridMap, radius: f64) -> Option<Pose2D> {
    (0..map.height())
        .flat_map(|cy| (0..map.width()).map(move |cx| (cx, cy)))
        .map(|(cx, cy)| map.cell_center(cx, cy))
        .find(|&(x, y)| !footprint_collides(map, x, y, radius))
        .map(|(x, y)| Pose2D::new(x, y, 0.0))
}

fn all_topics(bus: &Bus) -> Vec<String> {
    bus.with_table(|t| t.directory().into_iter().map(|(n, _)| n).collect())
}

fn tap_all(bus: &Bus) -> Result<(u64, std::sync::Arc<Outbox>)> {
    let topics = all_topics(bus);
    let refs: Vec<&str> = topics.iter().map(String::as_str).collect();
    Ok(bus.tap(&refs, None)?)
}

fn open_recorder(path: &PathBuf, header: &LogHeader) -> Result<Recorder<BufWriter<File>>> {
    let f = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    Ok(Recorder::new(BufWriter::new(f), header)?)
}

fn scenario(name: &str, seed: u64, json: bool, record: Option<PathBuf>) -> Result<ExitCode> {
    let name: ScenarioName = name.parse()?;
    let started = std::time::Instant::now();
    let bus = Bus::new(Mode::Live);
    let tap = match &record {
        Some(_) => Some(tap_all(&bus)?),
        None => None,
    };
    let report = Scenario::build(name)?.run(seed, tap.as_ref().map(|_| &bus))?;
    if let (Some(path), Some((_, outbox))) = (&record, &tap) {
        let mut rec = open_recorder(path, &LogHeader::new(Some(name.as_str()), Some(seed)))?;
        rec.drain(outbox)?;
        let (n, _) = rec.finish()?;
        eprintln!("recorded {n} frames to {}", path.display());
    }
    let reference = match name {
        ScenarioName::HallwayFault => Some(Scenario::build(ScenarioName::HallwayOk)?.run(seed, None)?),
        _ => None,
    };
    let failures = assess(&report, reference.as_ref());
    if json {
        println!("{}", report.to_json());
    }
    eprintln!(
        "{name}: {} ticks, {:.1} s sim, collided={}, goal_reached={}, announced={:?}, obstacle_side={:?}, {:.2} s wall",
        report.ticks,
        report.sim_time,
        report.collided,
        report.goal_reached,
        report.announced_signal,
        report.obstacle_side,
        started.elapsed().as_secs_f64()
    );
    if failures.is_empty() {
        eprintln!("{name}: PASS");
        Ok(ExitCode::SUCCESS)
    } else {
        for f in &failures {
            eprintln!("{name}: FAIL {f}");
        }
        Ok(ExitCode::from(2))
    }
}

fn publish_status(bus: &Bus, message: Option<String>) {
    let mut st: StatusMsg = bus.with_table(|t| t.status());
    st.message = message;
    if let Err(e) = bus.publish_msg(T_STATUS, schema::STATUS, &st) {
        log::warn!("status publish failed: {e}");
    }
}

#[allow(clippy::too_many_arguments)]
async fn run(
    map: PathBuf,
    known: Option<PathBuf>,
    port: u16,
    rate: f64,
    record: Option<PathBuf>,
    faults: Vec<FaultSpec>,
    seed: u64,
    start: Option<Pose2D>,
    goal: Option<(f64, f64)>,
    duration: Option<f64>,
) -> Result<ExitCode> {
    if !(rate > 0.0 && rate.is_finite()) {
        bail!("--rate must be positive");
    }
    let truth = read_map(&map)?;
    let known = match &known {
        Some(p) => read_map(p)?,
        None => truth.clone(),
    };
    let start = match start {
        Some(s) => s,
        None => first_free_pose(&truth, SimConfig::default().robot_radius).context("map has no free cell for the robot")?,
    };
    let bus = Bus::new(Mode::Live);
    let recording = match &record {
        Some(path) => {
            let (id, outbox) = tap_all(&bus)?;
            let mut rec = open_recorder(path, &LogHeader::new(None, Some(seed)))?;
            let task = tokio::spawn(async move {
                let r = rec.follow(&outbox).await;
                r.and_then(|_| rec.finish()).map(|(n, _)| n)
            });
            Some((id, task))
        }
        None => None,
    };
    let (inbox_id, inbox) = bus.tap(&[T_GOAL, T_FAULT], None)?;
    // the tap replays latched values; none exist yet
    inbox.drain();

    let server = serve(bus.clone(), loopback(port)).await.with_context(|| format!("binding port {port}"))?;
    eprintln!("serving ws://{}/bridge", server.local_addr());

    let mut pipeline = Pipeline::new(truth, known, start, seed, PipelineConfig::default());
    for f in faults {
        pipeline.add_fault(f);
    }
    pipeline.set_goal(goal);
    let dt = pipeline.cfg.dt;
    let mut ticker = tokio::time::interval(Duration::from_secs_f64(1.0 / rate));
    ticker.set_missed_tick_behavior(tokio::time::MissedTickBehavior::Delay);
    let ctrl_c = tokio::signal::ctrl_c();
    tokio::pin!(ctrl_c);
    let mut last_error = None;
    let mut tick: u64 = 0;
    loop {
        tokio::select! {
            _ = &mut ctrl_c => break,
            _ = ticker.tick() => {}
        }
        for d in inbox.drain() {
            let Some(meta) = d.meta else { continue };
            let v: serde_json::Value = serde_json::from_str(&meta.msg)?;
            if meta.topic == T_GOAL {
                let g: GoalMsg = serde_json::from_value(v)?;
                pipeline.set_goal(Some((g.x, g.y)));
                last_error = None;
            } else if meta.topic == T_FAULT {
                pipeline.add_fault(serde_json::from_value(v)?);
            }
        }
        let out = pipeline.tick(Some(&bus))?;
        let err = out.plan_error.as_ref().map(|e| format!("no plan: {e}"));
        if err.is_some() && err != last_error {
            publish_status(&bus, err.clone());
        } else if tick % 10 == 0 {
            publish_status(&bus, None);
        }
        last_error = err;
        tick += 1;
        if duration.is_some_and(|d| out.t + dt > d + 1e-9) {
            break;
        }
    }
    server.shutdown().await;
    bus.close_session(inbox_id);
    if let Some((id, task)) = recording {
        // closing the session lets the recorder drain and stop
        bus.close_session(id);
        let n = task.await??;
        eprintln!("recorded {n} frames");
    }
    Ok(ExitCode::SUCCESS)
}

async fn replay_cmd(log: PathBuf, speed: f64, port: u16, hold: bool) -> Result<ExitCode> {
    let f = File::open(&log).with_context(|| format!("opening {}", log.display()))?;
    let parsed = SessionLog::read(BufReader::new(f))?;
    let bus = Bus::new(Mode::Replay);
    let server = serve(bus.clone(), loopback(port)).await.with_context(|| format!("binding port {port}"))?;
    eprintln!("replaying {} records on ws://{}/bridge", parsed.records.len(), server.local_addr());
    let n = replay(&parsed, speed, &bus).await?;
    let summary = serde_json::json!({"published": n, "corrupt": parsed.corrupt, "duration": parsed.duration()});
    let mut out = std::io::stdout().lock();
    writeln!(out, "{summary}")?;
    out.flush()?;
    if hold {
        tokio::signal::ctrl_c().await?;
    }
    server.shutdown().await;
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Scenario { name, seed, json, record } => scenario(&name, seed, json, record),
        Command::Run {
            map,
            known,
            port,
            rate,
            record,
            fault,
            seed,
            start,
            goal,
            duration,
        } => tokio_main(run(map, known, port, rate, record, fault, seed, start, goal, duration)),
        Command::Replay { log, speed, port, hold } => tokio_main(replay_cmd(log, speed, port, hold)),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn tokio_main(fut: impl std::future::Future<Output = Result<ExitCode>>) -> Result<ExitCode> {
    tokio::runtime::Builder::new_multi_thread().enable_all().build()?.block_on(fut)
}
