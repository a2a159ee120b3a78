//! Block renderer turning `ActiveCellSet` snapshots into binaural audio.
//!
//! Each (cell, marker, trigger time) gets a voice. A voice replays its row's
//! note at every loop boundary of its activation, truncated with a 10 ms fade
//! when the loop is shorter than the note, and runs the dry signal through
//! the IR pair nearest its column azimuth. Snapshots take effect at the sample
//! matching their timestamp (never earlier than the current block), so the
//! output does not depend on how the timeline is cut into blocks.
//!
//! The render path does not allocate once the mixer is built: voices live in
//! a fixed pool and IR history buffers are sized up front.

use std::sync::Arc;

use crossbeam::queue::ArrayQueue;

use super::hrir::HrirSet;
use super::synth::{synth_note, NoteSample};
use super::AudioError;
use crate::encoder::{note_for_row, ActiveCellSet, CellGrid, CellId, COLS, ROWS};

pub const SAMPLE_RATE: u32 = 44_100;
/// Nominal note length; also the 2D loop length.
pub const NOTE_LENGTH: f64 = 2.0;
pub const MAX_VOICES: usize = 64;
const FADE_S: f64 = 0.010;

/// Interleaved stereo samples starting at `start_time` seconds.
#[derive(Debug, Clone, PartialEq)]
pub struct AudioBlock {
    pub frames: Vec<f32>,
    pub sample_rate: u32,
    pub start_time: f64,
}

impl AudioBlock {
    pub fn n_frames(&self) -> usize {
        self.frames.len() / 2
    }

    pub fn left(&self) -> impl Iterator<Item = f32> + '_ {
        self.frames.iter().step_by(2).copied()
    }

    pub fn right(&self) -> impl Iterator<Item = f32> + '_ {
        self.frames.iter().skip(1).step_by(2).copied()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MixerConfig {
    pub sample_rate: u32,
    /// Gain applied to every voice before summing.
    pub voice_gain: f32,
    pub master_gain: f32,
}

impl Default for MixerConfig {
    fn default() -> Self {
        Self {
            sample_rate: SAMPLE_RATE,
            voice_gain: 0.3,
            master_gain: 1.0,
        }
    }
}

/// Linear up to 0.95, tanh knee above; output magnitude never exceeds 1.
pub fn soft_clip(x: f32) -> f32 {
    const KNEE: f32 = 0.95;
    let a = x.abs();
    if a <= KNEE {
        x
    } else {
        let y = KNEE + (1.0 - KNEE) * ((a - KNEE) / (1.0 - KNEE)).tanh();
        y.min(1.0).copysign(x)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct VoiceKey {
    cell: CellId,
    marker_id: u32,
    first_seen: u64,
}

#[derive(Debug, Clone)]
struct Voice {
    active: bool,
    key: VoiceKey,
    row: usize,
    ir: usize,
    // loop schedule from the latest snapshot
    loop_start: f64,
    period: f64,
    next_k: u64,
    next_onset: i64,
    last_onset: i64,
    // note instance in flight
    inst_start: i64,
    inst_len: usize,
    inst_fade: usize,
    release_at: Option<i64>,
    silent_run: usize,
    hist: Vec<f32>,
    w: usize,
}

impl Voice {
    fn idle(ir_len: usize) -> Voice {
        Voice {
            active: false,
            key: VoiceKey {
                cell: CellId { row: 0, col: 0 },
                marker_id: 0,
                first_seen: 0,
            },
            row: 0,
            ir: 0,
            loop_start: 0.0,
            period: NOTE_LENGTH,
            next_k: 0,
            next_onset: i64::MAX,
            last_onset: i64::MIN,
            inst_start: 0,
            inst_len: 0,
            inst_fade: 0,
            release_at: None,
            silent_run: usize::MAX,
            hist: vec![0.0; 2 * ir_len],
            w: 0,
        }
    }
}

/// Real-time mixer state: voice pool, render cursors and IR histories.
pub struct Mixer {
    config: MixerConfig,
    notes: [NoteSample; ROWS],
    /// Time-reversed IRs per HRIR entry: (left, right).
    irs: Vec<(Vec<f32>, Vec<f32>)>,
    ir_len: usize,
    /// IR entry per grid column.
    col_ir: [usize; COLS],
    voices: Vec<Voice>,
    pos: i64,
    fade_len: usize,
}

fn to_sample(t: f64, sr: u32) -> i64 {
    (t * sr as f64).round() as i64
}

impl Mixer {
    /// Mixer with the synthesized note bank.
    pub fn new(hrirs: &HrirSet, grid: CellGrid, config: MixerConfig) -> Result<Mixer, AudioError> {
        let mut notes = Vec::with_capacity(ROWS);
        for row in 0..ROWS {
            let f = note_for_row(row).expect("row in range").frequency();
            notes.push(synth_note(f, NOTE_LENGTH, config.sample_rate)?);
        }
        Self::with_notes(hrirs, grid, config, notes.try_into().expect("three rows"))
    }

    /// Mixer with caller-supplied notes, indexed by row (top first).
    pub fn with_notes(
        hrirs: &HrirSet,
        grid: CellGrid,
        config: MixerConfig,
        notes: [NoteSample; ROWS],
    ) -> Result<Mixer, AudioError> {
        if hrirs.sample_rate != config.sample_rate {
            return Err(AudioError::RateMismatch {
                expected: config.sample_rate,
                found: hrirs.sample_rate,
            });
        }
        if let Some(n) = notes.iter().find(|n| n.sample_rate != config.sample_rate) {
            return Err(AudioError::RateMismatch {
                expected: config.sample_rate,
                found: n.sample_rate,
            });
        }
        let irs = hrirs
            .entries
            .iter()
            .map(|e| {
                let mut l = e.left.clone();
                let mut r = e.right.clone();
                l.reverse();
                r.reverse();
                (l, r)
            })
            .collect();
        let ir_len = hrirs.ir_len();
        let col_ir = std::array::from_fn(|c| hrirs.nearest(grid.azimuths[c]));
        Ok(Mixer {
            config,
            notes,
            irs,
            ir_len,
            col_ir,
            voices: (0..MAX_VOICES).map(|_| Voice::idle(ir_len)).collect(),
            pos: 0,
            fade_len: (FADE_S * config.sample_rate as f64).round() as usize,
        })
    }

    pub fn sample_rate(&self) -> u32 {
        self.config.sample_rate
    }

    /// Absolute index of the next frame to be rendered.
    pub fn position(&self) -> i64 {
        self.pos
    }

    pub fn time(&self) -> f64 {
        self.pos as f64 / self.config.sample_rate as f64
    }

    /// Number of voices still producing sound (including release tails).
    pub fn active_voices(&self) -> usize {
        self.voices.iter().filter(|v| v.active).count()
    }

    fn onset_sample(&self, v: &Voice, k: u64) -> i64 {
        to_sample(v.loop_start + k as f64 * v.period, self.config.sample_rate)
    }

    fn schedule_next(&self, v: &mut Voice) {
        if v.release_at.is_some() {
            v.next_onset = i64::MAX;
            return;
        }
        let sr = self.config.sample_rate as f64;
        let mut k = 0;
        if v.last_onset != i64::MIN {
            k = (((v.last_onset as f64 / sr) - v.loop_start) / v.period).floor().max(0.0) as u64;
            // Boundaries closer than half a loop to the last onset are that
            // same onset seen through a re-based schedule.
            let guard = v.last_onset + (0.5 * v.period * sr) as i64;
            while self.onset_sample(v, k) <= guard {
                k += 1;
            }
        }
        v.next_k = k;
        v.next_onset = self.onset_sample(v, k);
    }

    fn start_instance(&self, v: &mut Voice, at: i64) {
        let note_len = self.notes[v.row].len();
        let loop_len = (v.period * self.config.sample_rate as f64).round() as usize;
        v.inst_start = at;
        v.last_onset = at;
        if loop_len < note_len {
            v.inst_len = loop_len;
            v.inst_fade = self.fade_len.min(loop_len);
        } else {
            v.inst_len = note_len;
            v.inst_fade = 0;
        }
    }

    fn apply(&mut self, snap: &ActiveCellSet, at: i64) {
        for i in 0..self.voices.len() {
            let v = &self.voices[i];
            if !v.active || v.release_at.is_some() {
                continue;
            }
            let present = snap.activations.iter().any(|a| {
                a.cell == v.key.cell && a.marker_id == v.key.marker_id && a.first_seen.to_bits() == v.key.first_seen
            });
            if !present {
                let v = &mut self.voices[i];
                v.release_at = Some(at);
                v.next_onset = i64::MAX;
            }
        }
        for act in &snap.activations {
            let key = VoiceKey {
                cell: act.cell,
                marker_id: act.marker_id,
                first_seen: act.first_seen.to_bits(),
            };
            let idx = match self
                .voices
                .iter()
                .position(|v| v.active && v.release_at.is_none() && v.key == key)
            {
                Some(i) => i,
                None => match self.voices.iter().position(|v| !v.active) {
                    Some(i) => {
                        let v = &mut self.voices[i];
                        v.active = true;
                        v.key = key;
                        v.row = act.cell.row as usize;
                        v.ir = self.col_ir[act.cell.col as usize];
                        v.last_onset = i64::MIN;
                        v.inst_len = 0;
                        v.inst_fade = 0;
                        v.release_at = None;
                        v.silent_run = usize::MAX;
                        v.hist.iter_mut().for_each(|s| *s = 0.0);
                        v.w = 0;
                        i
                    }
                    // Pool exhausted: the activation stays silent.
                    None => continue,
                },
            };
            let mut v = std::mem::replace(&mut self.voices[idx], Voice::idle(0));
            v.loop_start = act.loop_start(snap.timestamp);
            v.period = act.period;
            self.schedule_next(&mut v);
            // A boundary that already passed starts now, aligned to its onset.
            let mut caught_up = false;
            while v.next_onset < at {
                let at = v.next_onset;
                self.start_instance(&mut v, at);
                caught_up = true;
                self.schedule_next(&mut v);
            }
            if caught_up {
                v.silent_run = 0;
            }
            self.voices[idx] = v;
        }
    }

    fn render_segment(&mut self, from: i64, to: i64, out: &mut [f32], block_start: i64) {
        if to <= from {
            return;
        }
        let l = self.ir_len;
        let fade_len = self.fade_len;
        let gain = self.config.voice_gain;
        for vi in 0..self.voices.len() {
            if !self.voices[vi].active {
                continue;
            }
            let mut v = std::mem::replace(&mut self.voices[vi], Voice::idle(0));
            let (ir_l, ir_r) = &self.irs[v.ir];
            for n in from..to {
                if n == v.next_onset {
                    self.start_instance(&mut v, n);
                    self.schedule_next(&mut v);
                }
                let idx = n - v.inst_start;
                let mut dry = 0.0f32;
                if idx >= 0 && (idx as usize) < v.inst_len {
                    let idx = idx as usize;
                    dry = self.notes[v.row].samples[idx];
                    let fade_from = v.inst_len - v.inst_fade;
                    if idx >= fade_from {
                        let x = (idx - fade_from) as f32 / v.inst_fade as f32;
                        dry *= 0.5 * (1.0 + (std::f32::consts::PI * x).cos());
                    }
                }
                if let Some(r) = v.release_at {
                    if n >= r {
                        let k = (n - r) as usize;
                        dry *= if k < fade_len {
                            0.5 * (1.0 + (std::f32::consts::PI * k as f32 / fade_len as f32).cos())
                        } else {
                            0.0
                        };
                    }
                }
                if dry == 0.0 {
                    v.silent_run = v.silent_run.saturating_add(1);
                } else {
                    v.silent_run = 0;
                }
                v.hist[v.w] = dry;
                v.hist[v.w + l] = dry;
                v.w = (v.w + 1) % l;
                if v.silent_run >= l {
                    continue;
                }
                let window = &v.hist[v.w..v.w + l];
                let yl: f32 = window.iter().zip(ir_l).map(|(a, b)| a * b).sum();
                let yr: f32 = window.iter().zip(ir_r).map(|(a, b)| a * b).sum();
                let o = 2 * (n - block_start) as usize;
                out[o] += gain * yl;
                out[o + 1] += gain * yr;
            }
            if let Some(r) = v.release_at {
                if to >= r + (fade_len + l) as i64 {
                    v.active = false;
                }
            }
            self.voices[vi] = v;
        }
    }

    /// Renders `out.len() / 2` stereo frames, applying each snapshot at its
    /// timestamp (clamped into this block). Snapshots must be in time order.
    pub fn render(&mut self, snapshots: &[ActiveCellSet], out: &mut [f32]) {
        debug_assert!(out.len() % 2 == 0);
        out.iter_mut().for_each(|s| *s = 0.0);
        let start = self.pos;
        let end = start + (out.len() / 2) as i64;
        let mut seg = start;
        for snap in snapshots {
            let at = to_sample(snap.timestamp, self.config.sample_rate).clamp(seg, end);
            self.render_segment(seg, at, out, start);
            self.apply(snap, at);
            seg = at;
        }
        self.render_segment(seg, end, out, start);
        let mg = self.config.master_gain;
        out.iter_mut().for_each(|s| *s = soft_clip(*s * mg));
        self.pos = end;
    }

    /// Renders one block from the latest snapshot.
    pub fn render_block(&mut self, snapshot: &ActiveCellSet, n_frames: usize) -> AudioBlock {
        let start_time = self.time();
        let mut frames = vec![0.0f32; 2 * n_frames];
        self.render(std::slice::from_ref(snapshot), &mut frames);
        AudioBlock {
            frames,
            sample_rate: self.config.sample_rate,
            start_time,
        }
    }
}

/// Producer half of the snapshot handoff.
#[derive(Clone)]
pub struct SnapshotSender {
    queue: Arc<ArrayQueue<ActiveCellSet>>,
}

/// Consumer half, owned by the audio callback.
pub struct SnapshotReceiver {
    queue: Arc<ArrayQueue<ActiveCellSet>>,
    pending: Vec<ActiveCellSet>,
}

/// Lock-free single-producer/single-consumer channel. When the consumer falls
/// behind, the oldest snapshots are overwritten.
pub fn snapshot_channel(capacity: usize) -> (SnapshotSender, SnapshotReceiver) {
    let queue = Arc::new(ArrayQueue::new(capacity.max(1)));
    (
        SnapshotSender { queue: queue.clone() },
        SnapshotReceiver {
            queue,
            pending: Vec::with_capacity(capacity.max(1)),
        },
    )
}

impl SnapshotSender {
    pub fn publish(&self, snapshot: ActiveCellSet) {
        let _ = self.queue.force_push(snapshot);
    }
}

impl SnapshotReceiver {
    /// Renders the next block using every snapshot published since the last
    /// call.
    pub fn render_into(&mut self, mixer: &mut Mixer, out: &mut [f32]) {
        self.pending.clear();
        while let Some(s) = self.queue.pop() {
            self.pending.push(s);
        }
        mixer.render(&self.pending, out);
    }
}
