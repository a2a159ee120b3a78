//! Deterministic replay of a session log into a stereo WAV.

use super::hrir::HrirSet;
use super::mixer::{Mixer, MixerConfig};
use super::wav::stereo_pcm16_bytes;
use super::AudioError;
use crate::encoder::ActiveCellSet;
use crate::engine::{Engine, EngineConfig};
use crate::scene::{CameraPose, Scene};
use crate::tasks::{EventKind, SessionLog};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RenderConfig {
    pub engine: EngineConfig,
    pub mixer: MixerConfig,
    pub block_frames: usize,
}

impl RenderConfig {
    pub fn new(engine: EngineConfig) -> Self {
        Self {
            engine,
            mixer: MixerConfig::default(),
            block_frames: 512,
        }
    }
}

/// Re-runs the engine over the log's pose timeline at the configured tick
/// rate. Snapshot timestamps are relative to the first event; the second
/// value is the timeline length in seconds.
pub fn log_snapshots(
    log: &SessionLog,
    scene: &Scene,
    engine: &EngineConfig,
) -> Result<(Vec<ActiveCellSet>, f64), AudioError> {
    let (Some(first), Some(last)) = (log.events.first(), log.events.last()) else {
        return Err(AudioError::MalformedLog("log has no events".into()));
    };
    if !log.events.iter().any(|e| matches!(e.kind, EventKind::Pose { .. })) {
        return Err(AudioError::MalformedLog("log has no pose timeline".into()));
    }
    if !(engine.tick_hz > 0.0) {
        return Err(AudioError::Invalid("tick rate must be positive".into()));
    }
    let (t0, t_end) = (first.t, last.t);
    let mut eng = Engine::new(scene.clone(), *engine, log.header.mode);
    let n_ticks = ((t_end - t0) * engine.tick_hz + 1e-9).floor() as usize;
    let mut snaps = Vec::with_capacity(n_ticks + 1);
    let mut next = 0;
    for i in 0..=n_ticks {
        let t = i as f64 / engine.tick_hz;
        while next < log.events.len() && log.events[next].t - t0 <= t + 1e-9 {
            match log.events[next].kind {
                EventKind::Pose { position, yaw, pitch } => eng.set_pose(CameraPose::new(position, yaw, pitch)),
                EventKind::ModeSet { mode } => eng.set_mode(mode),
                _ => {}
            }
            next += 1;
        }
        let s = eng
            .step(t)
            .map_err(|e| AudioError::MalformedLog(format!("encoder: {e}")))?;
        snaps.push(s.clone());
    }
    Ok((snaps, t_end - t0))
}

/// Renders `n_frames` stereo frames from time-ordered snapshots, feeding the
/// mixer in blocks of `block_frames`.
pub fn render_timeline(mixer: &mut Mixer, snapshots: &[ActiveCellSet], n_frames: usize, block_frames: usize) -> Vec<f32> {
    let sr = mixer.sample_rate() as f64;
    let block = block_frames.max(1);
    let mut out = vec![0.0f32; 2 * n_frames];
    let mut next = 0;
    let mut start = 0;
    while start < n_frames {
        let len = block.min(n_frames - start);
        let end = (start + len) as i64;
        let first = next;
        while next < snapshots.len() && (snapshots[next].timestamp * sr).round() as i64 <= end - 1 {
            next += 1;
        }
        mixer.render(&snapshots[first..next], &mut out[2 * start..2 * (start + len)]);
        start += len;
    }
    out
}

/// Stereo PCM16 WAV of the session's sonification. Identical inputs give
/// identical bytes.
pub fn render_offline(log: &SessionLog, scene: &Scene, hrirs: &HrirSet, config: &RenderConfig) -> Result<Vec<u8>, AudioError> {
    let (snaps, duration) = log_snapshots(log, scene, &config.engine)?;
    let mut mixer = Mixer::new(hrirs, config.engine.grid, config.mixer)?;
    let n_frames = (duration * config.mixer.sample_rate as f64).round() as usize;
    let samples = render_timeline(&mut mixer, &snaps, n_frames, config.block_frames);
    stereo_pcm16_bytes(&samples, config.mixer.sample_rate)
}
