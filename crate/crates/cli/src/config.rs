//! Optional `--config` file: engine and judging overrides as JSON.

use std::path::Path;

use echogrid_core::tasks::{JudgeConfig, SimConfig, TaskKind};
use echogrid_core::{CellGrid, EngineConfig, Mode};
use echogrid_server::SessionConfig;
use serde::Deserialize;

use crate::error::{read_to_string, CliError, CliResult};

#[derive(Debug, Clone, Copy, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProfileOverride {
    pub min_range: Option<f64>,
    pub max_range: Option<f64>,
    pub max_view_angle: Option<f64>,
    pub occlusion: Option<bool>,
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub tick_hz: Option<f64>,
    /// Column azimuths in degrees, left to right.
    pub azimuths: Option<[f64; 5]>,
    #[serde(default)]
    pub localization: ProfileOverride,
    #[serde(default)]
    pub navigation: ProfileOverride,
    pub judge: Option<JudgeConfig>,
    pub pointing_sigma_deg: Option<f64>,
    pub tick_budget: Option<u64>,
}

impl RunConfig {
    pub fn load(path: Option<&Path>) -> CliResult<Self> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = read_to_string(path)?;
        let cfg: RunConfig = serde_json::from_str(&text).map_err(|e| CliError::read(path, e))?;
        cfg.validate().map_err(|e| CliError::read(path, e))?;
        Ok(cfg)
    }

    fn validate(&self) -> Result<(), String> {
        if let Some(hz) = self.tick_hz {
            if !(hz.is_finite() && hz > 0.0) {
                return Err(format!("tick_hz must be positive, got {hz}"));
            }
        }
        if let Some(az) = self.azimuths {
            if az.windows(2).any(|w| !(w[0] < w[1])) || az.iter().any(|a| a.abs() > 90.0) {
                return Err(format!("azimuths must increase within [-90, 90], got {az:?}"));
            }
        }
        for kind in [TaskKind::Localization, TaskKind::Navigation] {
            self.engine(kind).profile.validate().map_err(|e| format!("{kind} profile: {e}"))?;
        }
        Ok(())
    }

    pub fn engine(&self, kind: TaskKind) -> EngineConfig {
        let (mut cfg, o) = match kind {
            TaskKind::Localization => (EngineConfig::localization(), &self.localization),
            TaskKind::Navigation => (EngineConfig::navigation(), &self.navigation),
        };
        if let Some(hz) = self.tick_hz {
            cfg.tick_hz = hz;
        }
        if let Some(az) = self.azimuths {
            cfg.grid = CellGrid { azimuths: az };
        }
        let p = &mut cfg.profile;
        p.min_range = o.min_range.unwrap_or(p.min_range);
        p.max_range = o.max_range.unwrap_or(p.max_range);
        p.max_view_angle = o.max_view_angle.unwrap_or(p.max_view_angle);
        p.occlusion = o.occlusion.unwrap_or(p.occlusion);
        cfg
    }

    pub fn sim(&self, kind: TaskKind, mode: Mode) -> SimConfig {
        let mut s = SimConfig::for_task(kind, mode);
        s.engine = self.engine(kind);
        if let Some(j) = self.judge {
            s.judge = j;
        }
        if let Some(sigma) = self.pointing_sigma_deg {
            s.pointing.sigma_deg = sigma;
        }
        if let Some(b) = self.tick_budget {
            s.tick_budget = b;
        }
        s
    }

    pub fn session(&self) -> SessionConfig {
        SessionConfig {
            localization: self.engine(TaskKind::Localization),
            navigation: self.engine(TaskKind::Navigation),
            judge: self.judge.unwrap_or_default(),
        }
    }
}
