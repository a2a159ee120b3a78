//! Scripted participants driven only by what the engine sounds.
//!
//! Each agent runs against a closed loop at the engine tick rate: it sets a
//! pose, the engine advances one tick, and the agent reads the resulting
//! `ActiveCellSet`. Agents other than `Oracle` never look at the scene.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::localization::{LocalizationTask, PointingNoise, TABLE_HEIGHT};
use super::log::{EventKind, LogHeader, SessionEvent, SessionLog, TaskKind};
use super::navigation::{floor_grid, JudgeConfig, NavigationTask, FINISH_Z, MARKER_OFFSET, START_Z};
use super::path::{find_path, simplify};
use super::TaskError;
use crate::encoder::{ActiveCellSet, CellId, Mode};
use crate::engine::{Engine, EngineConfig};
use crate::scene::{CameraPose, Vec3};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Agent {
    /// Table raster scan, centers each sound, then points (localization).
    Sweep,
    /// Aims up and down to read distance from camera tilt (navigation).
    UpDownRanger,
    /// Reads the scene directly; the perfect-information bound.
    Oracle,
}

impl Agent {
    pub fn supports(self, task: TaskKind) -> bool {
        matches!(
            (self, task),
            (Agent::Oracle, _) | (Agent::Sweep, TaskKind::Localization) | (Agent::UpDownRanger, TaskKind::Navigation)
        )
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Agent::Sweep => "sweep",
            Agent::UpDownRanger => "up_down_ranger",
            Agent::Oracle => "oracle",
        }
    }
}

impl std::fmt::Display for Agent {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Agent {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "sweep" => Ok(Agent::Sweep),
            "up_down_ranger" | "updownranger" | "ranger" => Ok(Agent::UpDownRanger),
            "oracle" => Ok(Agent::Oracle),
            other => Err(format!("unknown agent {other:?} (expected sweep, up-down-ranger or oracle)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum TaskSpec {
    Localization(LocalizationTask),
    Navigation(NavigationTask),
}

impl TaskSpec {
    pub fn kind(&self) -> TaskKind {
        match self {
            TaskSpec::Localization(_) => TaskKind::Localization,
            TaskSpec::Navigation(_) => TaskKind::Navigation,
        }
    }

    pub fn seed(&self) -> u64 {
        match self {
            TaskSpec::Localization(t) => t.seed,
            TaskSpec::Navigation(t) => t.seed,
        }
    }

    pub fn scene(&self) -> &crate::scene::Scene {
        match self {
            TaskSpec::Localization(t) => &t.scene,
            TaskSpec::Navigation(t) => &t.scene,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimConfig {
    pub engine: EngineConfig,
    pub mode: Mode,
    /// Ticks after which a run is aborted.
    pub tick_budget: u64,
    pub pointing: PointingNoise,
    pub judge: JudgeConfig,
}

impl SimConfig {
    pub fn for_task(kind: TaskKind, mode: Mode) -> Self {
        Self {
            engine: match kind {
                TaskKind::Localization => EngineConfig::localization(),
                TaskKind::Navigation => EngineConfig::navigation(),
            },
            mode,
            tick_budget: 100_000,
            pointing: PointingNoise::default(),
            judge: JudgeConfig::default(),
        }
    }
}

struct OutOfTicks;

struct Sim<'a> {
    engine: Engine,
    log: SessionLog,
    ticks: u64,
    budget: u64,
    tick_hz: f64,
    pose: CameraPose,
    heard: ActiveCellSet,
    rng: ChaCha8Rng,
    pointing: PointingNoise,
    nav: Option<(&'a NavigationTask, f64)>,
    collided: Vec<bool>,
    new_collisions: Vec<usize>,
}

impl Sim<'_> {
    fn now(&self) -> f64 {
        self.ticks as f64 / self.tick_hz
    }

    /// Sets the pose, advances one tick and refreshes what is heard.
    fn look(&mut self, pose: CameraPose) -> Result<(), OutOfTicks> {
        if self.ticks >= self.budget {
            return Err(OutOfTicks);
        }
        self.ticks += 1;
        self.place(pose);
        Ok(())
    }

    fn place(&mut self, pose: CameraPose) {
        let t = self.now();
        self.pose = pose;
        self.log.events.push(SessionEvent::pose(t, &pose));
        self.engine.set_pose(pose);
        self.heard = self.engine.step(t).expect("tick clock is monotone").clone();
        if let Some((task, radius)) = self.nav {
            for (i, o) in task.obstacles.iter().enumerate() {
                if !self.collided[i] && o.position.planar_distance(pose.position) < radius {
                    self.collided[i] = true;
                    self.new_collisions.push(i);
                    self.event(EventKind::Collision { obstacle: Some(i as u32) });
                }
            }
        }
    }

    fn event(&mut self, kind: EventKind) {
        let t = self.now();
        self.log.events.push(SessionEvent { t, kind });
    }

    fn cell_of(&self, marker: u32) -> Option<CellId> {
        self.heard.activations.iter().find(|a| a.marker_id == marker).map(|a| a.cell)
    }

    fn heard_markers(&self) -> Vec<u32> {
        let mut ids: Vec<u32> = self.heard.activations.iter().map(|a| a.marker_id).collect();
        ids.sort_unstable();
        ids.dedup();
        ids
    }
}

/// Runs one scripted session. The returned log is complete; a run that
/// exceeds the tick budget fails with the partial log attached.
pub fn run_scripted(agent: Agent, task: &TaskSpec, config: &SimConfig, seed: u64) -> Result<SessionLog, TaskError> {
    let kind = task.kind();
    if !agent.supports(kind) {
        return Err(TaskError::AgentMismatch { agent, task: kind });
    }
    let mut header = LogHeader::new(format!("agent-{seed}"), kind, config.mode, task.seed());
    header.free_text = Some(format!("scripted agent {agent}, seed {seed}"));
    let mut sim = Sim {
        engine: Engine::new(task.scene().clone(), config.engine, config.mode),
        log: SessionLog::new(header),
        ticks: 0,
        budget: config.tick_budget,
        tick_hz: config.engine.tick_hz,
        pose: CameraPose::new(Vec3::ZERO, 0.0, 0.0),
        heard: ActiveCellSet::empty(config.mode, 0.0),
        rng: ChaCha8Rng::seed_from_u64(seed),
        pointing: config.pointing,
        nav: match task {
            TaskSpec::Navigation(t) => Some((t, config.judge.collision_radius)),
            TaskSpec::Localization(_) => None,
        },
        collided: match task {
            TaskSpec::Navigation(t) => vec![false; t.obstacles.len()],
            TaskSpec::Localization(_) => Vec::new(),
        },
        new_collisions: Vec::new(),
    };
    sim.event(EventKind::TaskStart);
    let outcome = match (agent, task) {
        (Agent::Sweep, TaskSpec::Localization(t)) => sweep(&mut sim, t),
        (Agent::Oracle, TaskSpec::Localization(t)) => oracle_localization(&mut sim, t),
        (Agent::UpDownRanger, TaskSpec::Navigation(t)) => up_down_ranger(&mut sim, t),
        (Agent::Oracle, TaskSpec::Navigation(t)) => oracle_navigation(&mut sim, t),
        _ => unreachable!("checked by supports()"),
    };
    match outcome {
        Ok(()) => {
            sim.event(EventKind::TaskEnd);
            sim.log.header.complete = true;
            Ok(sim.log)
        }
        Err(OutOfTicks) => Err(TaskError::BudgetExceeded {
            ticks: sim.ticks,
            log: Box::new(sim.log),
        }),
    }
}

// ---------------------------------------------------------------------------
// Localization

/// Camera standoff above the table during the sweep.
pub const SWEEP_STANDOFF: f64 = 0.3;
const SWEEP_LANES: [f64; 3] = [-0.25, 0.0, 0.25];
const SWEEP_STEP: f64 = 0.01;
const CENTER_COARSE: f64 = 0.005;
const CENTER_FINE: f64 = 0.002;

fn table_pose(x: f64, z: f64) -> CameraPose {
    CameraPose::new(Vec3::new(x, TABLE_HEIGHT + SWEEP_STANDOFF, z), 0.0, -90.0)
}

/// Moves along one axis until `inside` stops holding, returning the
/// midpoint between the last inside and first outside positions.
fn boundary<F, P>(sim: &mut Sim, start: f64, step: f64, pose: P, inside: F) -> Result<f64, OutOfTicks>
where
    F: Fn(&Sim) -> bool,
    P: Fn(f64) -> CameraPose,
{
    let mut v = start;
    for _ in 0..400 {
        sim.look(pose(v + step))?;
        if !inside(sim) {
            return Ok(v + step / 2.0);
        }
        v += step;
    }
    Ok(v)
}

/// Brings `marker` into the center column then the center row by moving the
/// camera over the table; returns the camera (x, z) above it.
fn center_on_table(sim: &mut Sim, marker: u32, mut x: f64, mut z: f64) -> Result<Option<(f64, f64)>, OutOfTicks> {
    // Coarse approach. Image left is -x, image top is +z with the camera
    // pointing straight down.
    for _ in 0..200 {
        let Some(c) = sim.cell_of(marker) else {
            return Ok(None);
        };
        if c.col == 2 && c.row == 1 {
            break;
        }
        if c.col != 2 {
            x += if c.col < 2 { -CENTER_COARSE } else { CENTER_COARSE };
        }
        if c.row != 1 {
            z += if c.row < 1 { CENTER_COARSE } else { -CENTER_COARSE };
        }
        sim.look(table_pose(x, z))?;
    }
    let in_col = |s: &Sim| s.cell_of(marker).is_some_and(|c| c.col == 2);
    let in_row = |s: &Sim| s.cell_of(marker).is_some_and(|c| c.row == 1);
    if !in_col(sim) || !in_row(sim) {
        return Ok(None);
    }
    let hi = boundary(sim, x, CENTER_FINE, |v| table_pose(v, z), in_col)?;
    sim.look(table_pose(x, z))?;
    let lo = boundary(sim, x, -CENTER_FINE, |v| table_pose(v, z), in_col)?;
    let cx = 0.5 * (hi + lo);
    sim.look(table_pose(cx, z))?;
    let hi = boundary(sim, z, CENTER_FINE, |v| table_pose(cx, v), in_row)?;
    sim.look(table_pose(cx, z))?;
    let lo = boundary(sim, z, -CENTER_FINE, |v| table_pose(cx, v), in_row)?;
    let cz = 0.5 * (hi + lo);
    sim.look(table_pose(cx, cz))?;
    Ok(Some((cx, cz)))
}

fn sweep(sim: &mut Sim, task: &LocalizationTask) -> Result<(), OutOfTicks> {
    let mut done: Vec<u32> = Vec::new();
    let z_steps = ((1.15 - -0.05) / SWEEP_STEP).round() as usize;
    for (lane_i, &lane) in SWEEP_LANES.iter().enumerate() {
        for k in 0..=z_steps {
            let k = if lane_i % 2 == 0 { k } else { z_steps - k };
            let z = -0.05 + k as f64 * SWEEP_STEP;
            sim.look(table_pose(lane, z))?;
            while let Some(m) = sim.heard_markers().into_iter().find(|m| !done.contains(m)) {
                done.push(m);
                if let Some((cx, cz)) = center_on_table(sim, m, lane, z)? {
                    let origin = Vec3::new(cx, TABLE_HEIGHT + SWEEP_STANDOFF, cz);
                    let target = Vec3::new(cx, TABLE_HEIGHT, cz);
                    let (px, pz) = sim.pointing.perturb(origin, target, &mut sim.rng);
                    sim.event(EventKind::PointSubmit {
                        x: px,
                        z: pz,
                        object_id: None,
                    });
                }
                sim.look(table_pose(lane, z))?;
            }
            if done.len() == task.objects.len() {
                return Ok(());
            }
        }
    }
    Ok(())
}

fn oracle_localization(sim: &mut Sim, task: &LocalizationTask) -> Result<(), OutOfTicks> {
    for o in &task.objects {
        sim.look(table_pose(o.x, o.z))?;
        sim.event(EventKind::PointSubmit {
            x: o.x,
            z: o.z,
            object_id: Some(o.id),
        });
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Navigation

pub const WALKER_EYE: f64 = 1.2;
/// Marker height the ranger assumes when converting tilt to distance.
pub const NOMINAL_MARKER_HEIGHT: f64 = 0.375;
/// Obstacles estimated closer than this are reported.
pub const REPORT_RANGE: f64 = 2.5;
const WALK_SPEED: f64 = 1.0;
const LEG_LENGTH: f64 = 1.0;
const SCAN_PITCHES: [f64; 2] = [-15.0, -35.0];
const SCAN_YAW: f64 = 50.0;
const SCAN_YAW_STEP: f64 = 5.0;
const AIM_COARSE: f64 = 2.0;
const AIM_FINE: f64 = 0.5;
const PLAN_CLEARANCES: [f64; 3] = [0.8, 0.6, 0.45];

fn eye(x: f64, z: f64, yaw: f64, pitch: f64) -> CameraPose {
    CameraPose::new(Vec3::new(x, WALKER_EYE, z), yaw, pitch)
}

/// Aims at `marker` by finding the yaw and pitch boundary midpoints of the
/// center cell, then reads distance from the depression angle. Returns the
/// bearing (yaw) and planar distance.
fn range_marker(sim: &mut Sim, marker: u32) -> Result<Option<(f64, f64)>, OutOfTicks> {
    let p = sim.pose.position;
    let (x, z) = (p.x, p.z);
    let (mut yaw, mut pitch) = (sim.pose.yaw, sim.pose.pitch);
    for _ in 0..120 {
        let Some(c) = sim.cell_of(marker) else {
            return Ok(None);
        };
        if c.col == 2 && c.row == 1 {
            break;
        }
        if c.col != 2 {
            yaw += if c.col < 2 { -AIM_COARSE } else { AIM_COARSE };
        }
        if c.row != 1 {
            pitch = (pitch + if c.row < 1 { AIM_COARSE } else { -AIM_COARSE }).clamp(-89.0, 30.0);
        }
        sim.look(eye(x, z, yaw, pitch))?;
    }
    let in_col = |s: &Sim| s.cell_of(marker).is_some_and(|c| c.col == 2);
    let in_row = |s: &Sim| s.cell_of(marker).is_some_and(|c| c.row == 1);
    if !in_col(sim) || !in_row(sim) {
        return Ok(None);
    }
    let hi = boundary(sim, yaw, AIM_FINE, |v| eye(x, z, v, pitch), in_col)?;
    sim.look(eye(x, z, yaw, pitch))?;
    let lo = boundary(sim, yaw, -AIM_FINE, |v| eye(x, z, v, pitch), in_col)?;
    let yaw_c = 0.5 * (hi + lo);
    sim.look(eye(x, z, yaw_c, pitch))?;
    if !in_row(sim) {
        return Ok(None);
    }
    let hi = boundary(sim, pitch, AIM_FINE, |v| eye(x, z, yaw_c, v), in_row)?;
    sim.look(eye(x, z, yaw_c, pitch))?;
    let lo = boundary(sim, pitch, -AIM_FINE, |v| eye(x, z, yaw_c, v), in_row)?;
    let depression = -0.5 * (hi + lo);
    if depression < 1.0 {
        return Ok(None);
    }
    let dist = (WALKER_EYE - NOMINAL_MARKER_HEIGHT) / depression.to_radians().tan();
    Ok(Some((yaw_c, dist)))
}

#[derive(Debug, Clone, Copy)]
struct Estimate {
    marker: u32,
    center: (f64, f64),
    reported: bool,
}

fn plan(from: (f64, f64), known: &[(f64, f64)]) -> Vec<(f64, f64)> {
    for c in PLAN_CLEARANCES {
        if let Some(p) = find_path(&floor_grid(known, c), from, FINISH_Z) {
            let mut p = simplify(&p);
            // Start from where we actually are, not the snapped node, and
            // end on the finish line rather than the nearest grid row.
            p[0] = from;
            if p.len() == 1 {
                p.push((from.0, FINISH_Z));
            }
            let last = p.len() - 1;
            p[last].1 = p[last].1.max(FINISH_Z);
            return p;
        }
    }
    vec![from, (from.0, FINISH_Z)]
}

/// Walks up to `budget` meters along `path`, facing the direction of travel.
fn walk(sim: &mut Sim, path: &[(f64, f64)], mut budget: f64, pitch: f64) -> Result<(f64, f64), OutOfTicks> {
    let step = WALK_SPEED / sim.tick_hz;
    let mut pos = (sim.pose.position.x, sim.pose.position.z);
    for w in path.iter().skip(1) {
        loop {
            let (dx, dz) = (w.0 - pos.0, w.1 - pos.1);
            let d = dx.hypot(dz);
            if d < 1e-9 || budget <= 1e-9 {
                break;
            }
            let s = step.min(d).min(budget);
            pos = (pos.0 + dx / d * s, pos.1 + dz / d * s);
            budget -= s;
            let yaw = dx.atan2(dz).to_degrees();
            sim.look(eye(pos.0, pos.1, yaw, pitch))?;
            if !sim.new_collisions.is_empty() {
                return Ok(pos);
            }
        }
        if budget <= 1e-9 {
            break;
        }
    }
    Ok(pos)
}

fn up_down_ranger(sim: &mut Sim, task: &NavigationTask) -> Result<(), OutOfTicks> {
    let mut pos = (0.0, START_Z);
    let mut estimates: Vec<Estimate> = Vec::new();
    let mut told: Vec<(f64, f64)> = Vec::new();
    sim.look(eye(pos.0, pos.1, 0.0, SCAN_PITCHES[0]))?;
    while pos.1 < FINISH_Z - 1e-6 {
        // Scan: sweep yaw at each tilt and collect what is heard.
        let mut heard: Vec<u32> = Vec::new();
        for &pitch in &SCAN_PITCHES {
            let n = (2.0 * SCAN_YAW / SCAN_YAW_STEP).round() as usize;
            for k in 0..=n {
                let yaw = -SCAN_YAW + k as f64 * SCAN_YAW_STEP;
                sim.look(eye(pos.0, pos.1, yaw, pitch))?;
                for m in sim.heard_markers() {
                    if !heard.contains(&m) {
                        heard.push(m);
                    }
                }
            }
        }
        heard.sort_unstable();
        for m in heard {
            if estimates.iter().any(|e| e.marker == m && e.reported) {
                continue;
            }
            // Re-acquire the marker: aim along the scan until it is heard.
            let mut found = false;
            'acquire: for &pitch in &SCAN_PITCHES {
                let n = (2.0 * SCAN_YAW / SCAN_YAW_STEP).round() as usize;
                for k in 0..=n {
                    let yaw = -SCAN_YAW + k as f64 * SCAN_YAW_STEP;
                    sim.look(eye(pos.0, pos.1, yaw, pitch))?;
                    if sim.cell_of(m).is_some() {
                        found = true;
                        break 'acquire;
                    }
                }
            }
            if !found {
                continue;
            }
            let Some((bearing, dist)) = range_marker(sim, m)? else {
                continue;
            };
            let b = bearing.to_radians();
            // The heard marker is on the face toward the walker; the object
            // center is a little further along the corridor.
            let center = (pos.0 + dist * b.sin(), pos.1 + dist * b.cos() + MARKER_OFFSET);
            let report = dist <= REPORT_RANGE;
            if report {
                sim.event(EventKind::ObstacleReport {
                    position: Vec3::new(center.0, 0.0, center.1),
                });
            }
            match estimates.iter_mut().find(|e| e.marker == m) {
                Some(e) => {
                    e.center = center;
                    e.reported |= report;
                }
                None => estimates.push(Estimate {
                    marker: m,
                    center,
                    reported: report,
                }),
            }
        }
        for i in sim.new_collisions.drain(..) {
            let o = task.obstacles[i].position;
            told.push((o.x, o.z));
        }
        let known: Vec<(f64, f64)> = estimates.iter().map(|e| e.center).chain(told.iter().copied()).collect();
        let route = plan(pos, &known);
        pos = walk(sim, &route, LEG_LENGTH, SCAN_PITCHES[0])?;
    }
    Ok(())
}

fn oracle_navigation(sim: &mut Sim, task: &NavigationTask) -> Result<(), OutOfTicks> {
    sim.look(eye(0.0, START_Z, 0.0, 0.0))?;
    for o in &task.obstacles {
        sim.event(EventKind::ObstacleReport { position: o.position });
    }
    let mut route = simplify(&task.path);
    route[0] = (0.0, START_Z);
    walk(sim, &route, f64::INFINITY, 0.0)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tasks::localization::{gen_localization, judge_localization};
    use crate::tasks::navigation::{gen_navigation, judge_obstacles};

    #[test]
    fn mismatched_agent_is_rejected() {
        let t = TaskSpec::Localization(gen_localization(0));
        let cfg = SimConfig::for_task(TaskKind::Localization, Mode::TwoD);
        assert!(matches!(
            run_scripted(Agent::UpDownRanger, &t, &cfg, 0),
            Err(TaskError::AgentMismatch { .. })
        ));
    }

    #[test]
    fn sweep_finds_all_three() {
        for seed in 0..5 {
            let task = gen_localization(seed);
            let cfg = SimConfig::for_task(TaskKind::Localization, Mode::ThreeD);
            let log = run_scripted(Agent::Sweep, &TaskSpec::Localization(task.clone()), &cfg, seed).unwrap();
            let r = judge_localization(&log, &task).unwrap();
            assert_eq!(r.found(), 3, "seed {seed}");
            assert!(r.mean_error().unwrap() < 0.1, "seed {seed}: {:?}", r);
        }
    }

    #[test]
    fn oracle_never_misses() {
        for seed in 0..5 {
            let task = gen_navigation(seed).unwrap();
            let cfg = SimConfig::for_task(TaskKind::Navigation, Mode::TwoD);
            let log = run_scripted(Agent::Oracle, &TaskSpec::Navigation(task.clone()), &cfg, seed).unwrap();
            assert!(log.header.complete);
            let r = judge_obstacles(&log, &task, &cfg.judge).unwrap();
            assert_eq!(r.missed_count, 0);
        }
    }

    #[test]
    fn budget_exhaustion_returns_partial_log() {
        let task = gen_navigation(1).unwrap();
        let mut cfg = SimConfig::for_task(TaskKind::Navigation, Mode::TwoD);
        cfg.tick_budget = 10;
        match run_scripted(Agent::UpDownRanger, &TaskSpec::Navigation(task), &cfg, 1) {
            Err(TaskError::BudgetExceeded { ticks, log }) => {
                assert_eq!(ticks, 10);
                assert!(!log.header.complete);
                assert!(log.task_end().is_none());
            }
            other => panic!("expected budget error, got {other:?}"),
        }
    }

    #[test]
    fn ranger_ignores_mode() {
        let task = gen_navigation(3).unwrap();
        let spec = TaskSpec::Navigation(task.clone());
        let a = run_scripted(Agent::UpDownRanger, &spec, &SimConfig::for_task(TaskKind::Navigation, Mode::TwoD), 3)
            .unwrap();
        let b = run_scripted(Agent::UpDownRanger, &spec, &SimConfig::for_task(TaskKind::Navigation, Mode::ThreeD), 3)
            .unwrap();
        assert_eq!(a.events, b.events);
        let r = judge_obstacles(&a, &task, &JudgeConfig::default()).unwrap();
        assert!(r.missed_count <= 2, "{r:?}");
    }
}
