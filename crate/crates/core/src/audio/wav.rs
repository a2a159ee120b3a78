//! WAV reading and writing on top of `hound`.

use std::io::{Cursor, Read, Seek};
use std::path::Path;

use super::AudioError;

fn samples_from<R: Read>(reader: hound::WavReader<R>) -> Result<(Vec<f32>, u32, u16), AudioError> {
    let spec = reader.spec();
    let samples = match (spec.sample_format, spec.bits_per_sample) {
        (hound::SampleFormat::Float, 32) => reader.into_samples::<f32>().collect::<Result<Vec<_>, _>>()?,
        (hound::SampleFormat::Int, 16) => reader
            .into_samples::<i16>()
            .map(|s| s.map(|v| v as f32 / 32_768.0))
            .collect::<Result<Vec<_>, _>>()?,
        (fmt, bits) => {
            return Err(AudioError::Invalid(format!(
                "unsupported WAV encoding {fmt:?}/{bits} bit (need PCM16 or float32)"
            )))
        }
    };
    Ok((samples, spec.sample_rate, spec.channels))
}

fn mono<R: Read>(reader: hound::WavReader<R>, what: &str) -> Result<(Vec<f32>, u32), AudioError> {
    let (samples, rate, channels) = samples_from(reader)?;
    if channels != 1 {
        return Err(AudioError::Invalid(format!("{what}: expected mono, found {channels} channels")));
    }
    Ok((samples, rate))
}

pub fn read_mono(path: &Path) -> Result<(Vec<f32>, u32), AudioError> {
    mono(hound::WavReader::open(path)?, &path.display().to_string())
}

pub fn read_mono_bytes(bytes: &[u8], what: &str) -> Result<(Vec<f32>, u32), AudioError> {
    mono(hound::WavReader::new(Cursor::new(bytes))?, what)
}

pub fn write_mono_f32(path: &Path, samples: &[f32], sample_rate: u32) -> Result<(), AudioError> {
    let spec = hound::WavSpec {
        channels: 1,
        sample_rate,
        bits_per_sample: 32,
        sample_format: hound::SampleFormat::Float,
    };
    let mut w = hound::WavWriter::create(path, spec)?;
    for &s in samples {
        w.write_sample(s)?;
    }
    w.finalize()?;
    Ok(())
}

/// Quantizes a unit-range sample to signed 16 bit.
pub fn to_pcm16(s: f32) -> i16 {
    (s.clamp(-1.0, 1.0) * 32_767.0).round() as i16
}

/// Encodes interleaved stereo samples as a PCM16 RIFF/WAVE byte stream.
pub fn stereo_pcm16_bytes(interleaved: &[f32], sample_rate: u32) -> Result<Vec<u8>, AudioError> {
    let spec = hound::WavSpec {
        channels: 2,
        sample_rate,
        bits_per_sample: 16,
        sample_format: hound::SampleFormat::Int,
    };
    let mut cursor = Cursor::new(Vec::with_capacity(44 + interleaved.len() * 2));
    {
        let mut w = hound::WavWriter::new(&mut cursor, spec)?;
        let mut i16w = w.get_i16_writer(interleaved.len() as u32);
        for &s in interleaved {
            i16w.write_sample(to_pcm16(s));
        }
        i16w.flush()?;
        w.finalize()?;
    }
    Ok(cursor.into_inner())
}

/// Decodes a stereo WAV into interleaved samples.
pub fn read_stereo<R: Read + Seek>(r: R) -> Result<(Vec<f32>, u32), AudioError> {
    let (samples, rate, channels) = samples_from(hound::WavReader::new(r)?)?;
    if channels != 2 {
        return Err(AudioError::Invalid(format!("expected stereo, found {channels} channels")));
    }
    Ok((samples, rate))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pcm16_header_and_length() {
        let bytes = stereo_pcm16_bytes(&[0.0, 0.5, -0.5, 1.0], 44_100).unwrap();
        assert_eq!(&bytes[0..4], b"RIFF");
        assert_eq!(&bytes[8..12], b"WAVE");
        assert_eq!(bytes.len(), 44 + 8);
        let (s, rate) = read_stereo(Cursor::new(bytes)).unwrap();
        assert_eq!(rate, 44_100);
        assert_eq!(s.len(), 4);
        assert!((s[1] - 0.5).abs() < 1e-4);
    }

    #[test]
    fn quantizer_saturates() {
        assert_eq!(to_pcm16(2.0), 32_767);
        assert_eq!(to_pcm16(-2.0), -32_767);
        assert_eq!(to_pcm16(0.0), 0);
    }
}
