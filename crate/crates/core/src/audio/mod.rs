//! Note synthesis, HRIR spatialization and block mixing.

pub mod hrir;
pub mod mixer;
pub mod offline;
pub mod synth;
pub mod wav;

use thiserror::Error;

pub use hrir::{bundled_hrir, load_hrir, parametric_hrir, spatialize, HrirEntry, HrirSet, Stereo};
pub use mixer::{snapshot_channel, soft_clip, AudioBlock, Mixer, MixerConfig, SnapshotReceiver, SnapshotSender};
pub use offline::{log_snapshots, render_offline, render_timeline, RenderConfig};
pub use synth::{synth_note, NoteSample};

#[derive(Debug, Error)]
pub enum AudioError {
    #[error("{0}")]
    Invalid(String),
    #[error("io: {0}")]
    Io(String),
    #[error("wav: {0}")]
    Wav(#[from] hound::Error),
    #[error("HRIR at {azimuth} deg: expected {expected} taps, got left {left} / right {right}")]
    LengthMismatch {
        azimuth: f64,
        expected: usize,
        left: usize,
        right: usize,
    },
    #[error("HRIR at {azimuth} deg: missing {side} channel")]
    MissingChannel { azimuth: i32, side: char },
    #[error("sample rate mismatch: expected {expected} Hz, found {found} Hz")]
    RateMismatch { expected: u32, found: u32 },
    #[error("malformed session log: {0}")]
    MalformedLog(String),
}
