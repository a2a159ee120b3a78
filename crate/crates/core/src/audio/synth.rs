use std::f64::consts::PI;
use std::path::Path;

use super::AudioError;

/// Relative amplitudes of partials 1..=6.
const PARTIALS: [f64; 6] = [1.0, 0.5, 0.33, 0.25, 0.2, 0.17];
const ATTACK_S: f64 = 0.005;
const PEAK: f64 = 0.9;

/// A mono note ready for spatialization.
#[derive(Debug, Clone, PartialEq)]
pub struct NoteSample {
    pub samples: Vec<f32>,
    pub sample_rate: u32,
    /// Nominal note length in seconds (the 2D loop length).
    pub nominal_length: f64,
}

impl NoteSample {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Loads a user-supplied mono WAV as a note. Samples are peak-normalized
    /// down to 0.9 when louder than that.
    pub fn from_wav(path: &Path) -> Result<NoteSample, AudioError> {
        let (mut samples, sample_rate) = super::wav::read_mono(path)?;
        if samples.iter().any(|s| !s.is_finite()) {
            return Err(AudioError::Invalid(format!("{}: non-finite samples", path.display())));
        }
        let peak = samples.iter().fold(0f32, |m, s| m.max(s.abs()));
        if peak > PEAK as f32 {
            let g = PEAK as f32 / peak;
            samples.iter_mut().for_each(|s| *s *= g);
        }
        let nominal_length = samples.len() as f64 / sample_rate as f64;
        Ok(NoteSample {
            samples,
            sample_rate,
            nominal_length,
        })
    }
}

/// Additive piano-like tone: six harmonics, 60 dB exponential decay over the
/// nominal length, 5 ms raised-cosine attack, peak-normalized to 0.9.
pub fn synth_note(frequency: f64, nominal_length: f64, sample_rate: u32) -> Result<NoteSample, AudioError> {
    if !(frequency > 0.0) || !(nominal_length > 0.0) || sample_rate == 0 {
        return Err(AudioError::Invalid(format!(
            "note needs positive frequency, length and rate (got {frequency} Hz, {nominal_length} s, {sample_rate} Hz)"
        )));
    }
    let sr = sample_rate as f64;
    let n = (nominal_length * sr).round() as usize;
    let decay = 1000f64.ln() / nominal_length;
    let mut raw: Vec<f64> = (0..n)
        .map(|i| {
            let t = i as f64 / sr;
            let tone: f64 = PARTIALS
                .iter()
                .enumerate()
                .map(|(h, a)| a * (2.0 * PI * frequency * (h + 1) as f64 * t).sin())
                .sum();
            let attack = if t < ATTACK_S {
                0.5 * (1.0 - (PI * t / ATTACK_S).cos())
            } else {
                1.0
            };
            tone * attack * (-decay * t).exp()
        })
        .collect();
    let peak = raw.iter().fold(0f64, |m, s| m.max(s.abs()));
    if peak > 0.0 {
        raw.iter_mut().for_each(|s| *s *= PEAK / peak);
    }
    Ok(NoteSample {
        samples: raw.into_iter().map(|s| s as f32).collect(),
        sample_rate,
        nominal_length,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn c3_two_seconds() {
        let n = synth_note(130.8128, 2.0, 44_100).unwrap();
        assert_eq!(n.len(), 88_200);
        let peak = n.samples.iter().fold(0f32, |m, s| m.max(s.abs()));
        assert!((peak - 0.9).abs() < 1e-3);
        let mean = n.samples.iter().map(|&s| s as f64).sum::<f64>() / n.len() as f64;
        assert!(mean.abs() < 1e-3, "{mean}");
        assert_eq!(n.samples[0], 0.0);
    }

    #[test]
    fn direct_formula_matches() {
        // Re-evaluate a handful of samples from the definition.
        let n = synth_note(200.0, 1.0, 8_000).unwrap();
        let sr = 8_000.0;
        let eval = |i: usize| {
            let t = i as f64 / sr;
            let tone: f64 = PARTIALS
                .iter()
                .enumerate()
                .map(|(h, a)| a * (2.0 * PI * 200.0 * (h + 1) as f64 * t).sin())
                .sum();
            let att = if t < 0.005 { 0.5 * (1.0 - (PI * t / 0.005).cos()) } else { 1.0 };
            tone * att * (-(1000f64.ln()) * t).exp()
        };
        let peak = (0..8_000).map(|i| eval(i).abs()).fold(0.0, f64::max);
        for i in [3, 40, 41, 777, 4_000, 7_999] {
            assert!((n.samples[i] as f64 - 0.9 * eval(i) / peak).abs() < 1e-6, "i={i}");
        }
    }

    #[test]
    fn decays_sixty_db() {
        let n = synth_note(164.8, 2.0, 44_100).unwrap();
        let rms = |s: &[f32]| (s.iter().map(|x| (*x as f64).powi(2)).sum::<f64>() / s.len() as f64).sqrt();
        let head = rms(&n.samples[441..4_410]);
        let tail = rms(&n.samples[n.len() - 4_410..]);
        assert!(20.0 * (tail / head).log10() < -50.0);
    }

    #[test]
    fn invalid_arguments() {
        assert!(synth_note(0.0, 2.0, 44_100).is_err());
        assert!(synth_note(100.0, 0.0, 44_100).is_err());
    }
}
