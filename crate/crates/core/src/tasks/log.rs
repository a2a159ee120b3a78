//! Session logs: a header line followed by one JSON event per line.

use serde::{Deserialize, Serialize};

use super::TaskError;
use crate::encoder::Mode;
use crate::scene::{CameraPose, Vec3};

pub const LOG_SCHEMA: &str = "echogrid-log/1";

/// Crossover group: which mode the participant used in session 1.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Group {
    #[serde(rename = "2d3d")]
    TwoDThreeD,
    #[serde(rename = "3d2d")]
    ThreeDTwoD,
}

impl Group {
    /// Mode used in session 1 or 2.
    pub fn mode_for_session(self, session: u8) -> Mode {
        let first = match self {
            Group::TwoDThreeD => Mode::TwoD,
            Group::ThreeDTwoD => Mode::ThreeD,
        };
        if session <= 1 {
            first
        } else {
            first.other()
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Group::TwoDThreeD => "2d3d",
            Group::ThreeDTwoD => "3d2d",
        }
    }
}

impl std::fmt::Display for Group {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Group {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "2d3d" => Ok(Group::TwoDThreeD),
            "3d2d" => Ok(Group::ThreeDTwoD),
            other => Err(format!("unknown group {other:?} (expected 2d3d or 3d2d)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskKind {
    Localization,
    Navigation,
}

impl TaskKind {
    pub fn as_str(self) -> &'static str {
        match self {
            TaskKind::Localization => "localization",
            TaskKind::Navigation => "navigation",
        }
    }
}

impl std::fmt::Display for TaskKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for TaskKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "localization" | "loc" => Ok(TaskKind::Localization),
            "navigation" | "nav" => Ok(TaskKind::Navigation),
            other => Err(format!("unknown task {other:?} (expected localization or navigation)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogHeader {
    pub schema: String,
    pub participant_id: String,
    pub group: Group,
    pub session_number: u8,
    pub mode: Mode,
    pub task: TaskKind,
    pub seed: u64,
    /// Navigation course number (1..=3).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub course: Option<u8>,
    pub complete: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub free_text: Option<String>,
}

impl LogHeader {
    pub fn new(participant_id: impl Into<String>, task: TaskKind, mode: Mode, seed: u64) -> Self {
        Self {
            schema: LOG_SCHEMA.into(),
            participant_id: participant_id.into(),
            group: Group::TwoDThreeD,
            session_number: 1,
            mode,
            task,
            seed,
            course: None,
            complete: false,
            free_text: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EventKind {
    Pose {
        position: Vec3,
        yaw: f64,
        pitch: f64,
    },
    /// A pointed table position. `object_id` is set when the pointer says
    /// which object it means; otherwise the nearest unscored one is used.
    PointSubmit {
        x: f64,
        z: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        object_id: Option<u32>,
    },
    ObstacleReport {
        position: Vec3,
    },
    ModeSet {
        mode: Mode,
    },
    TaskStart,
    TaskEnd,
    /// The assistant had to intervene. Without an index the obstacle nearest
    /// the current pose is blamed.
    Collision {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        obstacle: Option<u32>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionEvent {
    pub t: f64,
    #[serde(flatten)]
    pub kind: EventKind,
}

impl SessionEvent {
    pub fn pose(t: f64, pose: &CameraPose) -> Self {
        Self {
            t,
            kind: EventKind::Pose {
                position: pose.position,
                yaw: pose.yaw,
                pitch: pose.pitch,
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SessionLog {
    pub header: LogHeader,
    pub events: Vec<SessionEvent>,
}

impl SessionLog {
    pub fn new(header: LogHeader) -> Self {
        Self {
            header,
            events: Vec::new(),
        }
    }

    /// Appends an event; timestamps may not go backwards.
    pub fn push(&mut self, t: f64, kind: EventKind) -> Result<(), TaskError> {
        if let Some(last) = self.events.last() {
            if t < last.t {
                return Err(TaskError::TimeRegression { prev: last.t, now: t });
            }
        }
        if !t.is_finite() {
            return Err(TaskError::Malformed("non-finite timestamp".into()));
        }
        self.events.push(SessionEvent { t, kind });
        Ok(())
    }

    fn time_of(&self, f: impl Fn(&EventKind) -> bool) -> Option<f64> {
        self.events.iter().find(|e| f(&e.kind)).map(|e| e.t)
    }

    pub fn task_start(&self) -> Option<f64> {
        self.time_of(|k| matches!(k, EventKind::TaskStart))
    }

    pub fn task_end(&self) -> Option<f64> {
        self.time_of(|k| matches!(k, EventKind::TaskEnd))
    }

    /// Exactly one start and one end, in that order.
    pub fn is_well_formed_complete(&self) -> bool {
        let starts = self.events.iter().filter(|e| matches!(e.kind, EventKind::TaskStart)).count();
        let ends = self.events.iter().filter(|e| matches!(e.kind, EventKind::TaskEnd)).count();
        starts == 1 && ends == 1 && self.task_start() <= self.task_end()
    }

    /// Timestamped poses in log order.
    pub fn poses(&self) -> impl Iterator<Item = (f64, CameraPose)> + '_ {
        self.events.iter().filter_map(|e| match e.kind {
            EventKind::Pose { position, yaw, pitch } => Some((e.t, CameraPose::new(position, yaw, pitch))),
            _ => None,
        })
    }

    pub fn to_jsonl(&self) -> String {
        let mut out = serde_json::to_string(&self.header).expect("header serializes");
        out.push('\n');
        for e in &self.events {
            out.push_str(&serde_json::to_string(e).expect("event serializes"));
            out.push('\n');
        }
        out
    }

    pub fn from_jsonl(text: &str) -> Result<SessionLog, TaskError> {
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let (_, first) = lines.next().ok_or_else(|| TaskError::Malformed("empty log".into()))?;
        let header: LogHeader = serde_json::from_str(first)
            .map_err(|e| TaskError::Malformed(format!("line 1: {e}")))?;
        if header.schema != LOG_SCHEMA {
            return Err(TaskError::Malformed(format!(
                "unsupported log schema {:?}, expected {LOG_SCHEMA:?}",
                header.schema
            )));
        }
        let mut log = SessionLog::new(header);
        for (i, line) in lines {
            let e: SessionEvent =
                serde_json::from_str(line).map_err(|err| TaskError::Malformed(format!("line {}: {err}", i + 1)))?;
            log.push(e.t, e.kind)
                .map_err(|err| TaskError::Malformed(format!("line {}: {err}", i + 1)))?;
        }
        Ok(log)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> SessionLog {
        let mut log = SessionLog::new(LogHeader::new("p01", TaskKind::Navigation, Mode::ThreeD, 7));
        log.push(0.0, EventKind::TaskStart).unwrap();
        log.push(
            0.0,
            EventKind::Pose {
                position: Vec3::new(0.0, 1.2, 0.5),
                yaw: 0.0,
                pitch: -20.0,
            },
        )
        .unwrap();
        log.push(
            1.5,
            EventKind::ObstacleReport {
                position: Vec3::new(1.0, 0.0, 4.0),
            },
        )
        .unwrap();
        log.push(3.0, EventKind::TaskEnd).unwrap();
        log
    }

    #[test]
    fn jsonl_round_trip() {
        let log = sample();
        let text = log.to_jsonl();
        assert_eq!(text.lines().count(), 5);
        assert!(text.lines().next().unwrap().contains("\"schema\":\"echogrid-log/1\""));
        assert!(text.contains("\"kind\":\"obstacle_report\""));
        assert_eq!(SessionLog::from_jsonl(&text).unwrap(), log);
    }

    #[test]
    fn rejects_time_regression_and_garbage() {
        let mut log = sample();
        assert!(log.push(2.0, EventKind::TaskEnd).is_err());
        assert!(SessionLog::from_jsonl("").is_err());
        assert!(SessionLog::from_jsonl("{\"schema\":\"other\"}").is_err());
        let bad = sample().to_jsonl() + "{\"t\":1.0,\"kind\":\"teleport\"}\n";
        assert!(matches!(SessionLog::from_jsonl(&bad), Err(TaskError::Malformed(_))));
    }

    #[test]
    fn crossover_modes() {
        assert_eq!(Group::TwoDThreeD.mode_for_session(1), Mode::TwoD);
        assert_eq!(Group::TwoDThreeD.mode_for_session(2), Mode::ThreeD);
        assert_eq!(Group::ThreeDTwoD.mode_for_session(2), Mode::TwoD);
    }
}
