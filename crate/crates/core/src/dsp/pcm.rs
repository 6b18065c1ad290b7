use std::io::{Read, Seek, Write};
use std::path::Path;

use super::{AudioBuffer, DspError};

const SCALE: f64 = 32768.0;

pub fn i16_to_sample(v: i16) -> f64 {
    v as f64 / SCALE
}

/// Half-away-from-zero rounding, saturating at the int16 range.
pub fn sample_to_i16(x: f64) -> i16 {
    (x * SCALE).round().clamp(i16::MIN as f64, i16::MAX as f64) as i16
}

/// Little-endian signed 16-bit PCM to samples in [-1, 1).
pub fn pcm16_decode(bytes: &[u8], sample_rate_hz: u32) -> Result<AudioBuffer, DspError> {
    if !bytes.len().is_multiple_of(2) {
        return Err(DspError::OddByteLength(bytes.len()));
    }
    let samples = bytes
        .chunks_exact(2)
        .map(|c| i16_to_sample(i16::from_le_bytes([c[0], c[1]])))
        .collect();
    Ok(AudioBuffer::new(samples, sample_rate_hz))
}

pub fn pcm16_encode(buffer: &AudioBuffer) -> Vec<u8> {
    buffer
        .samples
        .iter()
        .flat_map(|&x| sample_to_i16(x).to_le_bytes())
        .collect()
}

/// Reads 16-bit integer PCM WAV, keeping only the first channel.
pub fn read_wav_from<R: Read>(reader: R) -> Result<AudioBuffer, DspError> {
    let mut r = hound::WavReader::new(reader)?;
    let spec = r.spec();
    if spec.sample_format != hound::SampleFormat::Int || spec.bits_per_sample != 16 {
        return Err(DspError::UnsupportedWav(format!(
            "need 16-bit integer PCM, got {:?} {}-bit",
            spec.sample_format, spec.bits_per_sample
        )));
    }
    let channels = spec.channels.max(1) as usize;
    let mut samples = Vec::with_capacity(r.len() as usize / channels);
    for (i, s) in r.samples::<i16>().enumerate() {
        let s = s?;
        if i % channels == 0 {
            samples.push(i16_to_sample(s));
        }
    }
    Ok(AudioBuffer::new(samples, spec.sample_rate))
}

pub fn read_wav(path: impl AsRef<Path>) -> Result<AudioBuffer, DspError> {
    let file = std::fs::File::open(path.as_ref())?;
    read_wav_from(std::io::BufReader::new(file))
}

/// Writes mono 16-bit PCM.
pub fn write_wav_to<W: Write + Seek>(buffer: &AudioBuffer, writer: W) -> Result<(), DspError> {
    let spec = hound::WavSpec {
        channels: 1,
        sample_rate: buffer.sample_rate_hz,
        bits_per_sample: 16,
        sample_format: hound::SampleFormat::Int,
    };
    let mut w = hound::WavWriter::new(writer, spec)?;
    for &x in &buffer.samples {
        w.write_sample(sample_to_i16(x))?;
    }
    w.finalize()?;
    Ok(())
}

pub fn write_wav(buffer: &AudioBuffer, path: impl AsRef<Path>) -> Result<(), DspError> {
    let file = std::fs::File::create(path.as_ref())?;
    write_wav_to(buffer, std::io::BufWriter::new(file))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Cursor;

    #[test]
    fn decode_examples() {
        assert_eq!(pcm16_decode(&[0, 0], 16_000).unwrap().samples, vec![0.0]);
        assert_eq!(pcm16_decode(&[0x00, 0x80], 16_000).unwrap().samples, vec![-1.0]);
        assert!(matches!(pcm16_decode(&[0], 16_000), Err(DspError::OddByteLength(1))));
    }

    #[test]
    fn exhaustive_round_trip() {
        let bytes: Vec<u8> = (i16::MIN..=i16::MAX).flat_map(|v| v.to_le_bytes()).collect();
        let a = pcm16_decode(&bytes, 16_000).unwrap();
        assert_eq!(pcm16_encode(&a), bytes);
        assert_eq!(pcm16_decode(&pcm16_encode(&a), 16_000).unwrap(), a);
    }

    #[test]
    fn encode_rounds_half_away_and_clamps() {
        let b = AudioBuffer::new(vec![0.5 / SCALE, -0.5 / SCALE, 1.5, -2.0], 16_000);
        let v: Vec<i16> = pcm16_encode(&b)
            .chunks_exact(2)
            .map(|c| i16::from_le_bytes([c[0], c[1]]))
            .collect();
        assert_eq!(v, vec![1, -1, 32767, -32768]);
    }

    #[test]
    fn wav_round_trip_in_memory() {
        let b = AudioBuffer::new(vec![0.0, 0.25, -0.5, 12345.0 / SCALE], 48_000);
        let mut cur = Cursor::new(Vec::new());
        write_wav_to(&b, &mut cur).unwrap();
        cur.set_position(0);
        assert_eq!(read_wav_from(cur).unwrap(), b);
    }

    #[test]
    fn wav_first_channel_and_rejects_float() {
        let spec = hound::WavSpec {
            channels: 2,
            sample_rate: 16_000,
            bits_per_sample: 16,
            sample_format: hound::SampleFormat::Int,
        };
        let mut cur = Cursor::new(Vec::new());
        {
            let mut w = hound::WavWriter::new(&mut cur, spec).unwrap();
            for (l, r) in [(100i16, -1i16), (200, -2)] {
                w.write_sample(l).unwrap();
                w.write_sample(r).unwrap();
            }
            w.finalize().unwrap();
        }
        cur.set_position(0);
        let b = read_wav_from(cur).unwrap();
        assert_eq!(b.samples, vec![100.0 / SCALE, 200.0 / SCALE]);

        let spec = hound::WavSpec {
            channels: 1,
            sample_rate: 16_000,
            bits_per_sample: 32,
            sample_format: hound::SampleFormat::Float,
        };
        let mut cur = Cursor::new(Vec::new());
        {
            let mut w = hound::WavWriter::new(&mut cur, spec).unwrap();
            w.write_sample(0.5f32).unwrap();
            w.finalize().unwrap();
        }
        cur.set_position(0);
        assert!(matches!(read_wav_from(cur), Err(DspError::UnsupportedWav(_))));
    }
}
