//! Wire format: one JSON object per text frame, discriminated by `type`.

use echogrid_core::encoder::{note_spec, CellActivation, CellGrid, CellId, NoteName, COLS, ROWS};
use echogrid_core::tasks::{Group, TaskKind};
use echogrid_core::{Mode, Vec3};
use serde::{Deserialize, Serialize};
use serde_json::Value;

pub const PROTOCOL: &str = "echogrid/1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskAction {
    Start,
    End,
    /// End the running task and start the following one.
    Next,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ErrorCode {
    #[serde(rename = "E_VERSION")]
    Version,
    #[serde(rename = "E_PHASE")]
    Phase,
    #[serde(rename = "E_MALFORMED")]
    Malformed,
    #[serde(rename = "E_INTERNAL")]
    Internal,
}

impl ErrorCode {
    pub fn as_str(self) -> &'static str {
        match self {
            ErrorCode::Version => "E_VERSION",
            ErrorCode::Phase => "E_PHASE",
            ErrorCode::Malformed => "E_MALFORMED",
            ErrorCode::Internal => "E_INTERNAL",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PhaseName {
    Ready,
    Running,
    Finished,
}

/// One sounding cell as the client needs it to schedule a voice.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CellMsg {
    pub row: u8,
    pub col: u8,
    pub note_hz: f64,
    pub azimuth_deg: f64,
    pub period_s: f64,
    pub marker_id: u32,
    /// Seconds into the current loop at `t`.
    pub phase_s: f64,
}

impl CellMsg {
    pub fn from_activation(a: &CellActivation, grid: &CellGrid) -> Self {
        let spec = note_spec(a.cell, grid);
        Self {
            row: a.cell.row,
            col: a.cell.col,
            note_hz: spec.frequency,
            azimuth_deg: spec.azimuth,
            period_s: a.period,
            marker_id: a.marker_id,
            phase_s: a.loop_phase,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridInfo {
    pub rows: usize,
    pub cols: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoteInfo {
    pub row: usize,
    pub name: NoteName,
    pub hz: f64,
}

pub fn grid_notes(grid: &CellGrid) -> Vec<NoteInfo> {
    (0..ROWS)
        .map(|row| {
            let spec = note_spec(CellId { row: row as u8, col: 0 }, grid);
            NoteInfo {
                row,
                name: spec.name,
                hz: spec.frequency,
            }
        })
        .collect()
}

pub fn grid_info() -> GridInfo {
    GridInfo { rows: ROWS, cols: COLS }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum WireMessage {
    // client -> server
    Hello {
        protocol: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        participant_id: Option<String>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        group: Option<Group>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        seed: Option<u64>,
        /// Ask for server-rendered PCM16 stereo in binary frames.
        #[serde(default, skip_serializing_if = "std::ops::Not::not")]
        pcm: bool,
    },
    Pose {
        t: f64,
        position: Vec3,
        yaw: f64,
        pitch: f64,
    },
    SetMode {
        mode: Mode,
    },
    TaskControl {
        action: TaskAction,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        t: Option<f64>,
    },
    PointSubmit {
        x: f64,
        z: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        t: Option<f64>,
    },
    ObstacleReport {
        position: Vec3,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        t: Option<f64>,
    },

    // server -> client
    Welcome {
        session_id: String,
        protocol: String,
        group: Group,
        scene: Value,
        grid: GridInfo,
        azimuths: Vec<f64>,
        notes: Vec<NoteInfo>,
        tick_hz: f64,
    },
    ActiveCells {
        t: f64,
        cells: Vec<CellMsg>,
    },
    TaskState {
        phase: PhaseName,
        step: usize,
        session_number: u8,
        group: Group,
        mode: Mode,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        task: Option<TaskKind>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        course: Option<u8>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        scene: Option<Value>,
    },
    Result {
        session_number: u8,
        mode: Mode,
        task: TaskKind,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        course: Option<u8>,
        result: Value,
    },
    Error {
        code: ErrorCode,
        message: String,
    },
}

impl WireMessage {
    pub fn error(code: ErrorCode, message: impl Into<String>) -> Self {
        WireMessage::Error {
            code,
            message: message.into(),
        }
    }

    /// True for messages a client may send.
    pub fn is_client_message(&self) -> bool {
        matches!(
            self,
            WireMessage::Hello { .. }
                | WireMessage::Pose { .. }
                | WireMessage::SetMode { .. }
                | WireMessage::TaskControl { .. }
                | WireMessage::PointSubmit { .. }
                | WireMessage::ObstacleReport { .. }
        )
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("wire messages serialize")
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tags_and_field_names() {
        let m = WireMessage::Pose {
            t: 1.5,
            position: Vec3::new(0.0, 1.2, 0.5),
            yaw: 10.0,
            pitch: -5.0,
        };
        let v: Value = serde_json::from_str(&m.to_json()).unwrap();
        assert_eq!(v["type"], "pose");
        assert_eq!(v["position"], serde_json::json!([0.0, 1.2, 0.5]));
        let e = WireMessage::error(ErrorCode::Phase, "no");
        assert!(e.to_json().contains("\"code\":\"E_PHASE\""));
    }

    #[test]
    fn optional_fields_default() {
        let m = WireMessage::from_json(r#"{"type":"task_control","action":"start"}"#).unwrap();
        assert_eq!(m, WireMessage::TaskControl { action: TaskAction::Start, t: None });
        let h = WireMessage::from_json(r#"{"type":"hello","protocol":"echogrid/1"}"#).unwrap();
        assert!(matches!(h, WireMessage::Hello { pcm: false, group: None, .. }));
    }

    #[test]
    fn unknown_fields_and_types_rejected() {
        assert!(WireMessage::from_json(r#"{"type":"pose","t":0,"position":[0,0,0],"yaw":0,"pitch":0,"roll":1}"#).is_err());
        assert!(WireMessage::from_json(r#"{"type":"teleport"}"#).is_err());
    }

    #[test]
    fn round_trips() {
        let msgs = [
            WireMessage::SetMode { mode: Mode::ThreeD },
            WireMessage::PointSubmit { x: 0.1, z: 0.4, t: Some(3.0) },
            WireMessage::ActiveCells {
                t: 0.5,
                cells: vec![CellMsg {
                    row: 1,
                    col: 2,
                    note_hz: 164.81,
                    azimuth_deg: 0.0,
                    period_s: 0.3,
                    marker_id: 4,
                    phase_s: 0.0,
                }],
            },
        ];
        for m in msgs {
            assert_eq!(WireMessage::from_json(&m.to_json()).unwrap(), m);
        }
    }
}
