//! Per-connection protocol state machine.
//!
//! A participant runs two sessions, one per mode, each made of a
//! localization task followed by three navigation courses. `handle` and
//! `tick` are pure: they return the next state and the frames to send, and a
//! rejected message leaves the state untouched.

use echogrid_core::encoder::CellId;
use echogrid_core::scene::scene_to_config;
use echogrid_core::tasks::{
    gen_localization, gen_navigation, judge_localization, judge_obstacles, EventKind, Group, JudgeConfig, LogHeader,
    SessionLog, TaskKind, TaskSpec,
};
use echogrid_core::{ActiveCellSet, CameraPose, Engine, EngineConfig, Mode, Vec3};
use serde_json::Value;

use crate::protocol::{grid_info, grid_notes, CellMsg, ErrorCode, PhaseName, TaskAction, WireMessage, PROTOCOL};

/// Sessions x (localization + courses).
pub const STEPS: usize = 8;
pub const COURSES: u8 = 3;
/// Upper bound on `active_cells` frames per second.
pub const MAX_MESSAGE_RATE: f64 = 60.0;

/// Position in the fixed task order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Step(pub usize);

impl Step {
    pub fn session_number(self) -> u8 {
        (self.0 / 4 + 1) as u8
    }

    pub fn task(self) -> TaskKind {
        if self.0 % 4 == 0 {
            TaskKind::Localization
        } else {
            TaskKind::Navigation
        }
    }

    pub fn course(self) -> Option<u8> {
        match self.0 % 4 {
            0 => None,
            k => Some(k as u8),
        }
    }

    /// Seed of this step's layout, derived from the participant seed.
    pub fn task_seed(self, base: u64) -> u64 {
        base.wrapping_mul(STEPS as u64).wrapping_add(self.0 as u64)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase {
    AwaitHello,
    Ready(Step),
    Running(Step),
    Finished,
}

#[derive(Debug, Clone, PartialEq)]
struct Running {
    task: TaskSpec,
    engine: Engine,
    log: SessionLog,
}

#[derive(Debug, Clone, PartialEq, Default)]
struct Emitter {
    last_t: Option<f64>,
    keys: Vec<(CellId, u32)>,
    loops: u64,
    pending: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SessionConfig {
    pub localization: EngineConfig,
    pub navigation: EngineConfig,
    pub judge: JudgeConfig,
}

impl Default for SessionConfig {
    fn default() -> Self {
        Self {
            localization: EngineConfig::localization(),
            navigation: EngineConfig::navigation(),
            judge: JudgeConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Session {
    id: String,
    config: SessionConfig,
    phase: Phase,
    group: Group,
    participant: String,
    seed: u64,
    pcm: bool,
    /// Latest client timestamp.
    clock: f64,
    pose: Option<CameraPose>,
    running: Option<Running>,
    emitter: Emitter,
    completed: Vec<SessionLog>,
}

type Reject = (ErrorCode, String);

fn phase_err(msg: impl Into<String>) -> Reject {
    (ErrorCode::Phase, msg.into())
}

impl Session {
    pub fn new(id: impl Into<String>, config: SessionConfig) -> Self {
        Self {
            id: id.into(),
            config,
            phase: Phase::AwaitHello,
            group: Group::TwoDThreeD,
            participant: String::new(),
            seed: 0,
            pcm: false,
            clock: 0.0,
            pose: None,
            running: None,
            emitter: Emitter::default(),
            completed: Vec::new(),
        }
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn phase(&self) -> Phase {
        self.phase
    }

    pub fn group(&self) -> Group {
        self.group
    }

    pub fn clock(&self) -> f64 {
        self.clock
    }

    pub fn wants_pcm(&self) -> bool {
        self.pcm
    }

    pub fn participant(&self) -> &str {
        &self.participant
    }

    /// Mode of the running task, if any.
    pub fn running_mode(&self) -> Option<Mode> {
        self.running.as_ref().map(|r| r.engine.mode())
    }

    /// Start time of the running task and its current snapshot.
    pub fn running_snapshot(&self) -> Option<(f64, &ActiveCellSet)> {
        self.running
            .as_ref()
            .map(|r| (r.log.task_start().unwrap_or(0.0), r.engine.snapshot()))
    }

    pub fn running_grid(&self) -> Option<echogrid_core::CellGrid> {
        self.running.as_ref().map(|r| r.engine.config().grid)
    }

    /// Logs of tasks that ended since the last call.
    pub fn take_completed(&mut self) -> Vec<SessionLog> {
        std::mem::take(&mut self.completed)
    }

    pub fn completed(&self) -> &[SessionLog] {
        &self.completed
    }

    /// Handles one client frame.
    pub fn handle(&self, msg: WireMessage) -> (Session, Vec<WireMessage>) {
        let mut next = self.clone();
        match next.apply(msg) {
            Ok(out) => (next, out),
            Err((code, message)) => (self.clone(), vec![WireMessage::error(code, message)]),
        }
    }

    /// Closes the connection: a running task is logged as incomplete.
    pub fn abort(&mut self) -> Option<SessionLog> {
        let mut r = self.running.take()?;
        r.log.header.complete = false;
        Some(r.log)
    }

    fn mode_for(&self, step: Step) -> Mode {
        self.group.mode_for_session(step.session_number())
    }

    fn stamp(&self, t: Option<f64>) -> Result<f64, Reject> {
        let t = t.unwrap_or(self.clock);
        if !t.is_finite() || t < self.clock {
            return Err((
                ErrorCode::Malformed,
                format!("timestamp {t} is earlier than {}", self.clock),
            ));
        }
        Ok(t)
    }

    fn apply(&mut self, msg: WireMessage) -> Result<Vec<WireMessage>, Reject> {
        if !msg.is_client_message() {
            return Err((ErrorCode::Malformed, "server-to-client message sent by client".into()));
        }
        if let WireMessage::Hello {
            protocol,
            participant_id,
            group,
            seed,
            pcm,
        } = msg
        {
            if self.phase != Phase::AwaitHello {
                return Err(phase_err("hello already received"));
            }
            if protocol != PROTOCOL {
                return Err((
                    ErrorCode::Version,
                    format!("unsupported protocol {protocol:?}, server speaks {PROTOCOL:?}"),
                ));
            }
            self.participant = participant_id.unwrap_or_else(|| self.id.clone());
            self.group = group.unwrap_or(Group::TwoDThreeD);
            self.seed = seed.unwrap_or(0);
            self.pcm = pcm;
            self.phase = Phase::Ready(Step(0));
            let first = gen_localization(Step(0).task_seed(self.seed));
            let grid = self.config.localization.grid;
            return Ok(vec![
                WireMessage::Welcome {
                    session_id: self.id.clone(),
                    protocol: PROTOCOL.into(),
                    group: self.group,
                    scene: scene_value(&first.scene),
                    grid: grid_info(),
                    azimuths: grid.azimuths.to_vec(),
                    notes: grid_notes(&grid),
                    tick_hz: self.config.localization.tick_hz,
                },
                self.state_message(None),
            ]);
        }
        if self.phase == Phase::AwaitHello {
            return Err(phase_err("expected hello first"));
        }
        match msg {
            WireMessage::Pose {
                t,
                position,
                yaw,
                pitch,
            } => {
                let t = self.stamp(Some(t))?;
                if !(position.is_finite() && yaw.is_finite() && pitch.is_finite()) {
                    return Err((ErrorCode::Malformed, "non-finite pose".into()));
                }
                let pose = CameraPose::new(position, yaw, pitch);
                self.clock = t;
                self.pose = Some(pose);
                if let Some(r) = &mut self.running {
                    r.engine.set_pose(pose);
                    r.log.push(t, EventKind::Pose { position, yaw: pose.yaw, pitch: pose.pitch }).expect("clock is monotone");
                }
                Ok(vec![])
            }
            WireMessage::SetMode { mode } => match self.phase {
                Phase::Ready(Step(0)) => {
                    self.group = if mode == Mode::TwoD {
                        Group::TwoDThreeD
                    } else {
                        Group::ThreeDTwoD
                    };
                    Ok(vec![self.state_message(None)])
                }
                Phase::Ready(step) if self.mode_for(step) == mode => Ok(vec![self.state_message(None)]),
                Phase::Ready(step) => Err(phase_err(format!(
                    "session {} runs in {} mode for group {}",
                    step.session_number(),
                    self.mode_for(step),
                    self.group
                ))),
                Phase::Running(_) => Err(phase_err("mode cannot change during a task")),
                _ => Err(phase_err("no further sessions")),
            },
            WireMessage::TaskControl { action, t } => {
                let t = self.stamp(t)?;
                match (action, self.phase) {
                    (TaskAction::Start, Phase::Ready(step)) => {
                        self.clock = t;
                        self.start(step, t)
                    }
                    (TaskAction::End, Phase::Running(step)) => {
                        self.clock = t;
                        self.end(step, t)
                    }
                    (TaskAction::Next, Phase::Running(step)) if step.0 + 1 < STEPS => {
                        self.clock = t;
                        let mut out = self.end(step, t)?;
                        out.extend(self.start(Step(step.0 + 1), t)?);
                        Ok(out)
                    }
                    (a, p) => Err(phase_err(format!("task_control {a:?} not allowed in {p:?}"))),
                }
            }
            WireMessage::PointSubmit { x, z, t } => {
                let t = self.stamp(t)?;
                let r = match (&mut self.running, self.phase) {
                    (Some(r), Phase::Running(s)) if s.task() == TaskKind::Localization => r,
                    _ => return Err(phase_err("point_submit outside a localization task")),
                };
                if !(x.is_finite() && z.is_finite()) {
                    return Err((ErrorCode::Malformed, "non-finite point".into()));
                }
                r.log.push(t, EventKind::PointSubmit { x, z, object_id: None }).expect("clock is monotone");
                self.clock = t;
                Ok(vec![])
            }
            WireMessage::ObstacleReport { position, t } => {
                let t = self.stamp(t)?;
                let r = match (&mut self.running, self.phase) {
                    (Some(r), Phase::Running(s)) if s.task() == TaskKind::Navigation => r,
                    _ => return Err(phase_err("obstacle_report outside a navigation course")),
                };
                if !position.is_finite() {
                    return Err((ErrorCode::Malformed, "non-finite position".into()));
                }
                r.log.push(t, EventKind::ObstacleReport { position }).expect("clock is monotone");
                self.clock = t;
                Ok(vec![])
            }
            _ => unreachable!("hello and server messages handled above"),
        }
    }

    fn start(&mut self, step: Step, t: f64) -> Result<Vec<WireMessage>, Reject> {
        let seed = step.task_seed(self.seed);
        let mode = self.mode_for(step);
        let (task, config) = match step.task() {
            TaskKind::Localization => (TaskSpec::Localization(gen_localization(seed)), self.config.localization),
            TaskKind::Navigation => {
                let nav = gen_navigation(seed).map_err(|e| (ErrorCode::Internal, e.to_string()))?;
                (TaskSpec::Navigation(nav), self.config.navigation)
            }
        };
        let mut header = LogHeader::new(self.participant.clone(), step.task(), mode, seed);
        header.group = self.group;
        header.session_number = step.session_number();
        header.course = step.course();
        let mut log = SessionLog::new(header);
        log.push(t, EventKind::TaskStart).expect("fresh log");
        let mut engine = Engine::starting_at(task.scene().clone(), config, mode, t);
        if let Some(p) = self.pose {
            engine.set_pose(p);
            log.push(t, EventKind::Pose { position: p.position, yaw: p.yaw, pitch: p.pitch }).expect("same instant");
        }
        let scene = scene_value(task.scene());
        self.running = Some(Running { task, engine, log });
        self.emitter = Emitter::default();
        self.phase = Phase::Running(step);
        Ok(vec![self.state_message(Some(scene))])
    }

    fn end(&mut self, step: Step, t: f64) -> Result<Vec<WireMessage>, Reject> {
        let mut r = self.running.take().expect("running phase has a task");
        r.log.push(t, EventKind::TaskEnd).expect("clock is monotone");
        r.log.header.complete = true;
        let result = match &r.task {
            TaskSpec::Localization(task) => judge_localization(&r.log, task).map(|x| serde_json::to_value(x)),
            TaskSpec::Navigation(task) => judge_obstacles(&r.log, task, &self.config.judge).map(|x| serde_json::to_value(x)),
        }
        .map_err(|e| (ErrorCode::Internal, e.to_string()))?
        .expect("results serialize");
        let msg = WireMessage::Result {
            session_number: step.session_number(),
            mode: r.engine.mode(),
            task: step.task(),
            course: step.course(),
            result,
        };
        self.completed.push(r.log);
        self.phase = if step.0 + 1 < STEPS {
            Phase::Ready(Step(step.0 + 1))
        } else {
            Phase::Finished
        };
        Ok(vec![msg, self.state_message(None)])
    }

    fn state_message(&self, scene: Option<Value>) -> WireMessage {
        let (phase, step) = match self.phase {
            Phase::AwaitHello => (PhaseName::Ready, Step(0)),
            Phase::Ready(s) => (PhaseName::Ready, s),
            Phase::Running(s) => (PhaseName::Running, s),
            Phase::Finished => (PhaseName::Finished, Step(STEPS - 1)),
        };
        WireMessage::TaskState {
            phase,
            step: step.0,
            session_number: step.session_number(),
            group: self.group,
            mode: self.mode_for(step),
            task: (phase != PhaseName::Finished).then(|| step.task()),
            course: step.course().filter(|_| phase != PhaseName::Finished),
            scene,
        }
    }

    /// Advances the engine to `now`. Emits `active_cells` on the first tick
    /// of a task, when the sounding set changes and when a loop boundary
    /// passes, never faster than `MAX_MESSAGE_RATE`.
    pub fn tick(&self, now: f64) -> (Session, Option<WireMessage>) {
        let mut next = self.clone();
        let msg = next.tick_mut(now);
        (next, msg)
    }

    pub fn tick_mut(&mut self, now: f64) -> Option<WireMessage> {
        let r = self.running.as_mut()?;
        let now = now.max(r.engine.snapshot().timestamp);
        let grid = r.engine.config().grid;
        let snap = r.engine.step(now).expect("time clamped to be monotone");
        let keys = snap.keys();
        let loops = snap.total_loops();
        let em = &mut self.emitter;
        let changed = em.last_t.is_none() || keys != em.keys || loops != em.loops;
        em.keys = keys;
        em.loops = loops;
        if !(changed || em.pending) {
            return None;
        }
        if let Some(last) = em.last_t {
            if now - last < 1.0 / MAX_MESSAGE_RATE - 1e-9 {
                em.pending = true;
                return None;
            }
        }
        em.pending = false;
        em.last_t = Some(now);
        Some(WireMessage::ActiveCells {
            t: now,
            cells: snap.activations.iter().map(|a| CellMsg::from_activation(a, &grid)).collect(),
        })
    }
}

fn scene_value(scene: &echogrid_core::Scene) -> Value {
    serde_json::from_str(&scene_to_config(scene)).expect("scene document is JSON")
}

/// Position helper for tests and tools.
pub fn pose_msg(t: f64, x: f64, y: f64, z: f64, yaw: f64, pitch: f64) -> WireMessage {
    WireMessage::Pose {
        t,
        position: Vec3::new(x, y, z),
        yaw,
        pitch,
    }
}
