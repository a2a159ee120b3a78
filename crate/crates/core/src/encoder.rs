//! Detection-to-sound encoding: the 3 x 5 cell grid, row notes, column
//! azimuths and the looping activation state machine.
//!
//! Rows carry pitch (top G3, middle E3, bottom C3) and columns carry azimuth.
//! A cell sounds for as long as its marker stays detected. In 2D mode every
//! loop lasts 2 s; in 3D mode a loop lasts as many seconds as the marker is
//! meters away. A changed distance only affects the loop length from the next
//! loop boundary on.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scene::{Detection, DetectionProfile, ImagePoint};

pub const ROWS: usize = 3;
pub const COLS: usize = 5;
pub const CELLS: usize = ROWS * COLS;

/// Loop length in 2D mode, seconds.
pub const FLAT_PERIOD: f64 = 2.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Mode {
    #[serde(rename = "2d")]
    TwoD,
    #[serde(rename = "3d")]
    ThreeD,
}

impl Mode {
    pub fn other(self) -> Mode {
        match self {
            Mode::TwoD => Mode::ThreeD,
            Mode::ThreeD => Mode::TwoD,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Mode::TwoD => "2d",
            Mode::ThreeD => "3d",
        }
    }
}

impl std::fmt::Display for Mode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Mode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "2d" => Ok(Mode::TwoD),
            "3d" => Ok(Mode::ThreeD),
            other => Err(format!("unknown mode {other:?} (expected 2d or 3d)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct CellId {
    /// 0 is the top row.
    pub row: u8,
    /// 0 is the left column.
    pub col: u8,
}

impl CellId {
    pub fn new(row: usize, col: usize) -> Option<CellId> {
        (row < ROWS && col < COLS).then(|| CellId {
            row: row as u8,
            col: col as u8,
        })
    }

    pub fn index(self) -> usize {
        self.row as usize * COLS + self.col as usize
    }

    pub fn all() -> impl Iterator<Item = CellId> {
        (0..ROWS).flat_map(|r| (0..COLS).map(move |c| CellId::new(r, c).unwrap()))
    }
}

/// Uniform 3 x 5 partition of the normalized image with one azimuth per column.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CellGrid {
    pub azimuths: [f64; COLS],
}

impl Default for CellGrid {
    fn default() -> Self {
        Self::with_spacing(20.0)
    }
}

impl CellGrid {
    /// Symmetric columns `spacing` degrees apart, centered on 0.
    pub fn with_spacing(spacing: f64) -> Self {
        let mut azimuths = [0.0; COLS];
        for (col, a) in azimuths.iter_mut().enumerate() {
            *a = spacing * (col as f64 - 2.0);
        }
        Self { azimuths }
    }

    pub fn from_azimuths(azimuths: [f64; COLS]) -> Result<Self, EncodeError> {
        let in_range = azimuths.iter().all(|a| (-90.0..=90.0).contains(a));
        let increasing = azimuths.windows(2).all(|w| w[0] < w[1]);
        if !in_range || !increasing {
            return Err(EncodeError::BadAzimuths(azimuths.to_vec()));
        }
        Ok(Self { azimuths })
    }

    pub fn rows(&self) -> usize {
        ROWS
    }

    pub fn cols(&self) -> usize {
        COLS
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum NoteName {
    C3,
    E3,
    G3,
}

impl NoteName {
    pub fn midi(self) -> i32 {
        match self {
            NoteName::C3 => 48,
            NoteName::E3 => 52,
            NoteName::G3 => 55,
        }
    }

    /// Equal-temperament frequency with A4 = 440 Hz.
    pub fn frequency(self) -> f64 {
        440.0 * 2f64.powf((self.midi() - 69) as f64 / 12.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoteSpec {
    pub name: NoteName,
    pub frequency: f64,
    /// Degrees, negative to the left.
    pub azimuth: f64,
}

#[derive(Debug, Error, PartialEq)]
pub enum EncodeError {
    #[error("image point ({u}, {v}) outside [0, 1]^2")]
    OutOfImage { u: f64, v: f64 },
    #[error("distance must be positive, got {0}")]
    NonPositiveDistance(f64),
    #[error("time went backwards: {now} < {prev}")]
    TimeRegression { prev: f64, now: f64 },
    #[error("row {0} outside 0..3")]
    BadRow(usize),
    #[error("column {0} outside 0..5")]
    BadCol(usize),
    #[error("column azimuths must be strictly increasing within [-90, 90]: {0:?}")]
    BadAzimuths(Vec<f64>),
}

/// Maps a normalized image point to its cell. Cells are half-open; points on
/// the far (1.0) edge clamp into the last row/column.
pub fn map_to_cell(p: ImagePoint, _grid: &CellGrid) -> Result<CellId, EncodeError> {
    let ok = |x: f64| (0.0..=1.0).contains(&x);
    if !ok(p.u) || !ok(p.v) {
        return Err(EncodeError::OutOfImage { u: p.u, v: p.v });
    }
    let row = ((p.v * ROWS as f64).floor() as usize).min(ROWS - 1);
    let col = ((p.u * COLS as f64).floor() as usize).min(COLS - 1);
    Ok(CellId::new(row, col).expect("clamped"))
}

/// Seconds between successive note onsets.
pub fn loop_period(mode: Mode, distance: f64, profile: &DetectionProfile) -> Result<f64, EncodeError> {
    if !(distance > 0.0) {
        return Err(EncodeError::NonPositiveDistance(distance));
    }
    Ok(match mode {
        Mode::TwoD => FLAT_PERIOD,
        Mode::ThreeD => profile.clamp_distance(distance),
    })
}

pub fn note_for_row(row: usize) -> Result<NoteName, EncodeError> {
    match row {
        0 => Ok(NoteName::G3),
        1 => Ok(NoteName::E3),
        2 => Ok(NoteName::C3),
        r => Err(EncodeError::BadRow(r)),
    }
}

pub fn azimuth_for_col(col: usize, grid: &CellGrid) -> Result<f64, EncodeError> {
    grid.azimuths.get(col).copied().ok_or(EncodeError::BadCol(col))
}

pub fn note_spec(cell: CellId, grid: &CellGrid) -> NoteSpec {
    let name = note_for_row(cell.row as usize).expect("valid cell");
    NoteSpec {
        name,
        frequency: name.frequency(),
        azimuth: grid.azimuths[cell.col as usize],
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CellActivation {
    pub cell: CellId,
    pub marker_id: u32,
    /// Latest measured distance, meters.
    pub distance: f64,
    pub first_seen: f64,
    /// Seconds into the current loop, in `[0, period)`.
    pub loop_phase: f64,
    /// Length of the current loop, seconds.
    pub period: f64,
    /// Loop boundaries crossed since the trigger.
    pub loops_completed: u64,
}

impl CellActivation {
    /// Start time of the loop in progress.
    pub fn loop_start(&self, now: f64) -> f64 {
        now - self.loop_phase
    }
}

/// The engine's sounding state at one instant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActiveCellSet {
    /// Sorted by (cell, marker_id); at most one entry per pair.
    pub activations: Vec<CellActivation>,
    pub mode: Mode,
    pub timestamp: f64,
}

impl ActiveCellSet {
    pub fn empty(mode: Mode, timestamp: f64) -> Self {
        Self {
            activations: Vec::new(),
            mode,
            timestamp,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.activations.is_empty()
    }

    pub fn len(&self) -> usize {
        self.activations.len()
    }

    /// Distinct cells currently sounding.
    pub fn sounding_cells(&self) -> Vec<CellId> {
        let mut cells: Vec<CellId> = self.activations.iter().map(|a| a.cell).collect();
        cells.dedup();
        cells
    }

    /// (cell, marker) membership, ignoring loop state.
    pub fn keys(&self) -> Vec<(CellId, u32)> {
        self.activations.iter().map(|a| (a.cell, a.marker_id)).collect()
    }

    pub fn total_loops(&self) -> u64 {
        self.activations.iter().map(|a| a.loops_completed).sum()
    }
}

fn advance(
    act: &CellActivation,
    dt: f64,
    distance: f64,
    mode: Mode,
    profile: &DetectionProfile,
) -> Result<CellActivation, EncodeError> {
    let mut next = *act;
    next.distance = distance;
    let mut phase = act.loop_phase + dt;
    if phase >= act.period {
        phase -= act.period;
        next.loops_completed += 1;
        let period = loop_period(mode, distance, profile)?;
        if phase >= period {
            let extra = (phase / period).floor();
            phase -= extra * period;
            next.loops_completed += extra as u64;
        }
        if phase >= period {
            phase -= period;
            next.loops_completed += 1;
        }
        next.period = period;
    }
    next.loop_phase = phase.max(0.0);
    Ok(next)
}

/// Advances the sounding state to `now` given this frame's detections.
///
/// New (cell, marker) pairs trigger with phase 0, pairs no longer detected
/// stop, survivors advance their phase and pick up a new period at each loop
/// boundary. A marker that changes cell retriggers in its new cell.
pub fn update_activations(
    prev: &ActiveCellSet,
    detections: &[Detection],
    grid: &CellGrid,
    mode: Mode,
    now: f64,
    profile: &DetectionProfile,
) -> Result<ActiveCellSet, EncodeError> {
    if now < prev.timestamp {
        return Err(EncodeError::TimeRegression {
            prev: prev.timestamp,
            now,
        });
    }
    let dt = now - prev.timestamp;
    let mut activations = Vec::with_capacity(detections.len());
    for det in detections {
        let cell = map_to_cell(det.image_point, grid)?;
        let existing = prev
            .activations
            .iter()
            .find(|a| a.cell == cell && a.marker_id == det.marker_id);
        let act = match existing {
            Some(a) => advance(a, dt, det.distance, mode, profile)?,
            None => CellActivation {
                cell,
                marker_id: det.marker_id,
                distance: det.distance,
                first_seen: now,
                loop_phase: 0.0,
                period: loop_period(mode, det.distance, profile)?,
                loops_completed: 0,
            },
        };
        activations.push(act);
    }
    activations.sort_by_key(|a| (a.cell, a.marker_id));
    activations.dedup_by_key(|a| (a.cell, a.marker_id));
    Ok(ActiveCellSet {
        activations,
        mode,
        timestamp: now,
    })
}
