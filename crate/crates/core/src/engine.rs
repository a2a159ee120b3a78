//! The tick loop: pose in, detections through the encoder, snapshot out.

use serde::{Deserialize, Serialize};

use crate::encoder::{update_activations, ActiveCellSet, CellGrid, EncodeError, Mode};
use crate::scene::{detect_markers, CameraIntrinsics, CameraPose, Detection, DetectionProfile, Scene};

/// Detection and encoding parameters shared by every consumer of a session.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EngineConfig {
    pub intrinsics: CameraIntrinsics,
    pub grid: CellGrid,
    pub profile: DetectionProfile,
    pub tick_hz: f64,
}

pub const DEFAULT_TICK_HZ: f64 = 30.0;

impl EngineConfig {
    pub fn localization() -> Self {
        Self {
            intrinsics: CameraIntrinsics::default(),
            grid: CellGrid::default(),
            profile: DetectionProfile::LOCALIZATION,
            tick_hz: DEFAULT_TICK_HZ,
        }
    }

    pub fn navigation() -> Self {
        Self {
            profile: DetectionProfile::NAVIGATION,
            ..Self::localization()
        }
    }

    pub fn tick_interval(&self) -> f64 {
        1.0 / self.tick_hz
    }
}

/// Single-writer owner of the authoritative sounding state.
#[derive(Debug, Clone, PartialEq)]
pub struct Engine {
    config: EngineConfig,
    scene: Scene,
    pose: Option<CameraPose>,
    state: ActiveCellSet,
}

impl Engine {
    pub fn new(scene: Scene, config: EngineConfig, mode: Mode) -> Self {
        Self::starting_at(scene, config, mode, 0.0)
    }

    pub fn starting_at(scene: Scene, config: EngineConfig, mode: Mode, t0: f64) -> Self {
        Self {
            config,
            scene,
            pose: None,
            state: ActiveCellSet::empty(mode, t0),
        }
    }

    pub fn config(&self) -> &EngineConfig {
        &self.config
    }

    pub fn scene(&self) -> &Scene {
        &self.scene
    }

    pub fn mode(&self) -> Mode {
        self.state.mode
    }

    pub fn pose(&self) -> Option<&CameraPose> {
        self.pose.as_ref()
    }

    pub fn snapshot(&self) -> &ActiveCellSet {
        &self.state
    }

    pub fn set_pose(&mut self, pose: CameraPose) {
        self.pose = Some(pose);
    }

    /// Switches mode; running loops keep their period until their next
    /// boundary.
    pub fn set_mode(&mut self, mode: Mode) {
        self.state.mode = mode;
    }

    /// Detections visible from the current pose (none before the first pose).
    pub fn detect(&self) -> Vec<Detection> {
        match &self.pose {
            Some(p) => detect_markers(&self.scene, p, &self.config.intrinsics, &self.config.profile),
            None => Vec::new(),
        }
    }

    /// Advances to `now` and returns the new snapshot.
    pub fn step(&mut self, now: f64) -> Result<&ActiveCellSet, EncodeError> {
        let detections = self.detect();
        self.state = update_activations(
            &self.state,
            &detections,
            &self.config.grid,
            self.state.mode,
            now,
            &self.config.profile,
        )?;
        Ok(&self.state)
    }
}
