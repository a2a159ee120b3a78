//! Head-related impulse responses: directory loading, the parametric
//! ITD/ILD fallback and nearest-azimuth convolution.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::synth::NoteSample;
use super::wav;
use super::AudioError;

pub const HRIR_SCHEMA: &str = "echogrid-hrir/1";

/// Head radius (m) and speed of sound (m/s) of the Woodworth ITD model.
pub const HEAD_RADIUS: f64 = 0.0875;
pub const SPEED_OF_SOUND: f64 = 343.0;
/// Far-ear level drop at 90 degrees, dB.
pub const MAX_ILD_DB: f64 = 6.0;

#[derive(Debug, Clone, PartialEq)]
pub struct HrirEntry {
    /// Degrees, negative to the left.
    pub azimuth: f64,
    pub left: Vec<f32>,
    pub right: Vec<f32>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HrirSet {
    pub sample_rate: u32,
    /// Strictly increasing azimuths, equal IR lengths.
    pub entries: Vec<HrirEntry>,
}

#[derive(Debug, Serialize, Deserialize)]
struct HrirIndex {
    schema: String,
    sample_rate: u32,
    azimuths: Vec<i32>,
}

impl HrirSet {
    pub fn new(sample_rate: u32, entries: Vec<HrirEntry>) -> Result<HrirSet, AudioError> {
        if sample_rate == 0 {
            return Err(AudioError::Invalid("HRIR sample rate must be positive".into()));
        }
        if entries.len() < 2 {
            return Err(AudioError::Invalid(format!(
                "an HRIR set needs at least 2 azimuths, got {}",
                entries.len()
            )));
        }
        for w in entries.windows(2) {
            if !(w[0].azimuth < w[1].azimuth) {
                return Err(AudioError::Invalid(format!(
                    "azimuths must be strictly increasing ({} then {})",
                    w[0].azimuth, w[1].azimuth
                )));
            }
        }
        let len = entries[0].left.len();
        if len == 0 {
            return Err(AudioError::Invalid("empty impulse response".into()));
        }
        for e in &entries {
            if e.left.len() != len || e.right.len() != len {
                return Err(AudioError::LengthMismatch {
                    azimuth: e.azimuth,
                    expected: len,
                    left: e.left.len(),
                    right: e.right.len(),
                });
            }
            if e.left.iter().chain(&e.right).any(|s| !s.is_finite()) {
                return Err(AudioError::Invalid(format!("non-finite IR at {} deg", e.azimuth)));
            }
        }
        Ok(HrirSet { sample_rate, entries })
    }

    pub fn ir_len(&self) -> usize {
        self.entries[0].left.len()
    }

    /// Index of the entry closest to `azimuth`; ties go to the entry nearer 0.
    pub fn nearest(&self, azimuth: f64) -> usize {
        let mut best = 0;
        for (i, e) in self.entries.iter().enumerate().skip(1) {
            let cur = &self.entries[best];
            let (d, db) = ((e.azimuth - azimuth).abs(), (cur.azimuth - azimuth).abs());
            if d < db || (d == db && e.azimuth.abs() < cur.azimuth.abs()) {
                best = i;
            }
        }
        best
    }
}

/// Woodworth interaural time difference in samples for `azimuth` degrees.
pub fn itd_samples(azimuth: f64, sample_rate: u32) -> usize {
    let theta = azimuth.abs().to_radians();
    ((HEAD_RADIUS / SPEED_OF_SOUND) * (theta + theta.sin()) * sample_rate as f64).round() as usize
}

/// Builds delayed, attenuated unit impulses: the far ear gets the Woodworth
/// delay and a 6 dB * sin(theta) level drop.
pub fn parametric_hrir(azimuths: &[f64], sample_rate: u32) -> Result<HrirSet, AudioError> {
    if let Some(a) = azimuths.iter().find(|a| !(-90.0..=90.0).contains(*a)) {
        return Err(AudioError::Invalid(format!("azimuth {a} outside [-90, 90]")));
    }
    let len = itd_samples(90.0, sample_rate) + 1;
    let entries = azimuths
        .iter()
        .map(|&az| {
            let delay = itd_samples(az, sample_rate);
            let gain = 10f64.powf(-MAX_ILD_DB * az.abs().to_radians().sin() / 20.0) as f32;
            let mut near = vec![0.0f32; len];
            near[0] = 1.0;
            let mut far = vec![0.0f32; len];
            far[delay] = gain;
            let (left, right) = if az > 0.0 { (far, near) } else { (near, far) };
            HrirEntry { azimuth: az, left, right }
        })
        .collect();
    HrirSet::new(sample_rate, entries)
}

/// Azimuths of the bundled set: -60 to +60 in 20 degree steps.
pub const BUNDLED_AZIMUTHS: [i32; 7] = [-60, -40, -20, 0, 20, 40, 60];

fn channel_file(az: i32, side: char) -> String {
    format!("{az}_{side}.wav")
}

fn load_with(
    index_bytes: &[u8],
    mut read: impl FnMut(&str) -> Result<Option<Vec<u8>>, AudioError>,
) -> Result<HrirSet, AudioError> {
    let index: HrirIndex = serde_json::from_slice(index_bytes)
        .map_err(|e| AudioError::Invalid(format!("hrir index.json: {e}")))?;
    if index.schema != HRIR_SCHEMA {
        return Err(AudioError::Invalid(format!(
            "hrir index schema {:?}, expected {HRIR_SCHEMA:?}",
            index.schema
        )));
    }
    let mut entries = Vec::with_capacity(index.azimuths.len());
    for &az in &index.azimuths {
        let mut channel = |side: char| -> Result<Vec<f32>, AudioError> {
            let name = channel_file(az, side);
            let bytes = read(&name)?.ok_or(AudioError::MissingChannel { azimuth: az, side })?;
            let (samples, rate) = wav::read_mono_bytes(&bytes, &name)?;
            if rate != index.sample_rate {
                return Err(AudioError::RateMismatch {
                    expected: index.sample_rate,
                    found: rate,
                });
            }
            Ok(samples)
        };
        let left = channel('L')?;
        let right = channel('R')?;
        entries.push(HrirEntry {
            azimuth: az as f64,
            left,
            right,
        });
    }
    HrirSet::new(index.sample_rate, entries)
}

/// Loads `<dir>/index.json` plus `<dir>/<az>_L.wav` / `<az>_R.wav`. A
/// directory holding an `hrir/` subdirectory is accepted too.
pub fn load_hrir(dir: &Path) -> Result<HrirSet, AudioError> {
    let dir: PathBuf = if !dir.join("index.json").exists() && dir.join("hrir/index.json").exists() {
        dir.join("hrir")
    } else {
        dir.to_path_buf()
    };
    let index = std::fs::read(dir.join("index.json"))
        .map_err(|e| AudioError::Io(format!("{}: {e}", dir.join("index.json").display())))?;
    load_with(&index, |name| {
        let p = dir.join(name);
        match std::fs::read(&p) {
            Ok(b) => Ok(Some(b)),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(None),
            Err(e) => Err(AudioError::Io(format!("{}: {e}", p.display()))),
        }
    })
}

/// Writes a set in the directory layout read by [`load_hrir`]. Azimuths are
/// rounded to whole degrees in file names.
pub fn write_hrir_dir(set: &HrirSet, dir: &Path) -> Result<(), AudioError> {
    std::fs::create_dir_all(dir).map_err(|e| AudioError::Io(e.to_string()))?;
    let azimuths: Vec<i32> = set.entries.iter().map(|e| e.azimuth.round() as i32).collect();
    for (e, az) in set.entries.iter().zip(&azimuths) {
        wav::write_mono_f32(&dir.join(channel_file(*az, 'L')), &e.left, set.sample_rate)?;
        wav::write_mono_f32(&dir.join(channel_file(*az, 'R')), &e.right, set.sample_rate)?;
    }
    let index = HrirIndex {
        schema: HRIR_SCHEMA.into(),
        sample_rate: set.sample_rate,
        azimuths,
    };
    let text = serde_json::to_string_pretty(&index).expect("index serializes") + "\n";
    std::fs::write(dir.join("index.json"), text).map_err(|e| AudioError::Io(e.to_string()))
}

macro_rules! bundled_files {
    ($($az:literal),*) => {
        &[$(
            (concat!($az, "_L.wav"), include_bytes!(concat!("../../assets/hrir/", $az, "_L.wav")).as_slice()),
            (concat!($az, "_R.wav"), include_bytes!(concat!("../../assets/hrir/", $az, "_R.wav")).as_slice()),
        )*]
    };
}

const BUNDLED_INDEX: &[u8] = include_bytes!("../../assets/hrir/index.json");
const BUNDLED_FILES: &[(&str, &[u8])] = bundled_files!("-60", "-40", "-20", "0", "20", "40", "60");

/// The HRIR set compiled into the crate (7 azimuths, 44.1 kHz).
pub fn bundled_hrir() -> HrirSet {
    load_with(BUNDLED_INDEX, |name| {
        Ok(BUNDLED_FILES.iter().find(|(n, _)| *n == name).map(|(_, b)| b.to_vec()))
    })
    .expect("bundled HRIR set is valid")
}

/// Stereo signal as separate channels.
#[derive(Debug, Clone, PartialEq)]
pub struct Stereo {
    pub left: Vec<f32>,
    pub right: Vec<f32>,
}

fn convolve(x: &[f32], h: &[f32]) -> Vec<f32> {
    let mut y = vec![0.0f32; x.len() + h.len() - 1];
    for (j, &hj) in h.iter().enumerate() {
        if hj == 0.0 {
            continue;
        }
        for (i, &xi) in x.iter().enumerate() {
            y[i + j] += xi * hj;
        }
    }
    y
}

/// Convolves a mono note with the nearest-azimuth IR pair. Output length is
/// note length + IR length - 1.
pub fn spatialize(note: &NoteSample, azimuth: f64, hrirs: &HrirSet) -> Result<Stereo, AudioError> {
    if note.sample_rate != hrirs.sample_rate {
        return Err(AudioError::RateMismatch {
            expected: hrirs.sample_rate,
            found: note.sample_rate,
        });
    }
    if note.is_empty() {
        return Err(AudioError::Invalid("empty note".into()));
    }
    let e = &hrirs.entries[hrirs.nearest(azimuth)];
    Ok(Stereo {
        left: convolve(&note.samples, &e.left),
        right: convolve(&note.samples, &e.right),
    })
}
