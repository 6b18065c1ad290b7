use rand::Rng;
use rand_distr::{Distribution, Normal};

use super::{AudioBuffer, DspError};

pub fn mean_square(x: &[f64]) -> f64 {
    if x.is_empty() {
        return 0.0;
    }
    x.iter().map(|v| v * v).sum::<f64>() / x.len() as f64
}

#[derive(Debug, Clone, PartialEq)]
pub struct NoiseMix {
    pub audio: AudioBuffer,
    pub gain: f64,
    /// Output samples clamped back into [-1, 1].
    pub clipped: usize,
    /// Start of the noise segment used.
    pub noise_offset: usize,
    /// Mean square of the scaled noise segment.
    pub scaled_noise_power: f64,
}

impl NoiseMix {
    /// 10·log10(P_signal / P_scaled_noise), measured before clipping.
    pub fn snr_db(&self, signal: &AudioBuffer) -> f64 {
        10.0 * (mean_square(&signal.samples) / self.scaled_noise_power).log10()
    }
}

/// Adds noise scaled to `snr_db` relative to the signal, then clamps to [-1, 1].
///
/// The noise must be at least as long as the signal; a longer noise track
/// contributes a segment whose start `rng` picks uniformly.
pub fn mix_noise_at_snr<R: Rng + ?Sized>(
    signal: &AudioBuffer,
    noise: &AudioBuffer,
    snr_db: f64,
    rng: &mut R,
) -> Result<NoiseMix, DspError> {
    if signal.sample_rate_hz != noise.sample_rate_hz {
        return Err(DspError::RateMismatch {
            expected: signal.sample_rate_hz,
            got: noise.sample_rate_hz,
        });
    }
    if noise.len() < signal.len() {
        return Err(DspError::Config(format!(
            "noise ({} samples) shorter than signal ({})",
            noise.len(),
            signal.len()
        )));
    }
    if !snr_db.is_finite() {
        return Err(DspError::Config(format!("snr_db must be finite, got {snr_db}")));
    }
    let p_signal = mean_square(&signal.samples);
    if p_signal == 0.0 {
        return Err(DspError::ZeroPower("signal"));
    }
    let offset = match noise.len() - signal.len() {
        0 => 0,
        slack => rng.random_range(0..=slack),
    };
    let segment = &noise.samples[offset..offset + signal.len()];
    let p_noise = mean_square(segment);
    if p_noise == 0.0 {
        return Err(DspError::ZeroPower("noise"));
    }
    let gain = (p_signal / (p_noise * 10f64.powf(snr_db / 10.0))).sqrt();
    let scaled: Vec<f64> = segment.iter().map(|n| gain * n).collect();
    let mut clipped = 0;
    let samples = signal
        .samples
        .iter()
        .zip(&scaled)
        .map(|(s, n)| {
            let y = s + n;
            if y.abs() > 1.0 {
                clipped += 1;
            }
            y.clamp(-1.0, 1.0)
        })
        .collect();
    Ok(NoiseMix {
        audio: AudioBuffer::new(samples, signal.sample_rate_hz),
        gain,
        clipped,
        noise_offset: offset,
        scaled_noise_power: mean_square(&scaled),
    })
}

/// Circular shift by `s` drawn uniformly from `[-max_shift, max_shift]`;
/// positive `s` moves samples later. Returns the shifted buffer and `s`.
pub fn random_shift<R: Rng + ?Sized>(
    buffer: &AudioBuffer,
    max_shift_samples: usize,
    rng: &mut R,
) -> Result<(AudioBuffer, i64), DspError> {
    if max_shift_samples >= buffer.len().max(1) {
        return Err(DspError::Config(format!(
            "max shift {max_shift_samples} must be < length {}",
            buffer.len()
        )));
    }
    let m = max_shift_samples as i64;
    let s = rng.random_range(-m..=m);
    Ok((shift(buffer, s), s))
}

/// Deterministic circular shift.
pub fn shift(buffer: &AudioBuffer, s: i64) -> AudioBuffer {
    let mut out = buffer.samples.clone();
    if !out.is_empty() {
        let k = s.rem_euclid(out.len() as i64) as usize;
        out.rotate_right(k);
    }
    AudioBuffer::new(out, buffer.sample_rate_hz)
}

/// Uniform white noise in `[-amplitude, amplitude]`.
pub fn white_noise_uniform<R: Rng + ?Sized>(n: usize, amplitude: f64, sample_rate_hz: u32, rng: &mut R) -> AudioBuffer {
    let a = amplitude.abs().min(1.0);
    let samples = (0..n).map(|_| rng.random_range(-a..=a)).collect();
    AudioBuffer::new(samples, sample_rate_hz)
}

/// Gaussian white noise with standard deviation `std`, clamped to [-1, 1].
pub fn white_noise_gaussian<R: Rng + ?Sized>(
    n: usize,
    std: f64,
    sample_rate_hz: u32,
    rng: &mut R,
) -> Result<AudioBuffer, DspError> {
    let dist = Normal::new(0.0, std).map_err(|e| DspError::Config(e.to_string()))?;
    let samples = (0..n).map(|_| dist.sample(rng).clamp(-1.0, 1.0)).collect();
    Ok(AudioBuffer::new(samples, sample_rate_hz))
}

/// Truncates or zero-pads at the end to exactly `n` samples.
pub fn fit_to_length(buffer: &AudioBuffer, n: usize) -> AudioBuffer {
    let mut s = buffer.samples.clone();
    s.resize(n, 0.0);
    AudioBuffer::new(s, buffer.sample_rate_hz)
}

/// One-second clip at the buffer's own rate.
pub fn clip_to_one_second(buffer: &AudioBuffer) -> AudioBuffer {
    fit_to_length(buffer, buffer.sample_rate_hz as usize)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn tone(n: usize, amp: f64) -> AudioBuffer {
        AudioBuffer::new((0..n).map(|i| amp * (i as f64 * 0.1).sin()).collect(), 16_000)
    }

    #[test]
    fn equal_power_unit_gain() {
        let s = tone(1000, 0.3);
        let m = mix_noise_at_snr(&s, &s, 0.0, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        assert!((m.gain - 1.0).abs() < 1e-12);
    }

    #[test]
    fn power_targets() {
        let s = tone(1000, 0.3);
        let n = AudioBuffer::new((0..1000).map(|i| ((i * 37 % 11) as f64 - 5.0) / 50.0).collect(), 16_000);
        let ps = mean_square(&s.samples);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let m = mix_noise_at_snr(&s, &n, 10.0, &mut rng).unwrap();
        assert!((m.scaled_noise_power - ps / 10.0).abs() < 1e-12);
        let m = mix_noise_at_snr(&s, &n, -5.0, &mut rng).unwrap();
        assert!((m.scaled_noise_power - ps * 10f64.sqrt()).abs() < 1e-12);
        assert!((m.snr_db(&s) + 5.0).abs() < 1e-9);
    }

    #[test]
    fn zero_power_rejected() {
        let z = AudioBuffer::new(vec![0.0; 10], 16_000);
        let t = tone(10, 0.5);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(matches!(mix_noise_at_snr(&z, &t, 0.0, &mut rng), Err(DspError::ZeroPower("signal"))));
        assert!(matches!(mix_noise_at_snr(&t, &z, 0.0, &mut rng), Err(DspError::ZeroPower("noise"))));
    }

    #[test]
    fn clipping_is_counted() {
        let s = AudioBuffer::new(vec![0.9; 100], 16_000);
        let n = AudioBuffer::new(vec![0.5; 100], 16_000);
        let m = mix_noise_at_snr(&s, &n, 0.0, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        assert_eq!(m.clipped, 100);
        assert!(m.audio.samples.iter().all(|x| *x == 1.0));
    }

    #[test]
    fn longer_noise_uses_seeded_segment() {
        let s = tone(100, 0.5);
        let n = tone(1000, 0.2);
        let a = mix_noise_at_snr(&s, &n, 3.0, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        let b = mix_noise_at_snr(&s, &n, 3.0, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        assert_eq!(a, b);
        assert!(a.noise_offset <= 900);
    }

    #[test]
    fn shift_definition() {
        let b = AudioBuffer::new(vec![1.0, 2.0, 3.0, 4.0], 16_000);
        assert_eq!(shift(&b, 1).samples, vec![4.0, 1.0, 2.0, 3.0]);
        assert_eq!(shift(&b, -1).samples, vec![2.0, 3.0, 4.0, 1.0]);
        assert_eq!(shift(&b, 0), b);
        let (x, s) = random_shift(&b, 0, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        assert_eq!((x, s), (b.clone(), 0));
        assert!(random_shift(&b, 4, &mut ChaCha8Rng::seed_from_u64(0)).is_err());
    }

    #[test]
    fn seeded_shift_reproducible() {
        let b = tone(100, 0.5);
        let a = random_shift(&b, 50, &mut ChaCha8Rng::seed_from_u64(42)).unwrap().1;
        let c = random_shift(&b, 50, &mut ChaCha8Rng::seed_from_u64(42)).unwrap().1;
        assert_eq!(a, c);
        assert!((-50..=50).contains(&a));
    }

    #[test]
    fn noise_sources_in_range() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        assert!(white_noise_uniform(1000, 0.5, 16_000, &mut rng)
            .samples
            .iter()
            .all(|x| x.abs() <= 0.5));
        assert!(white_noise_gaussian(1000, 2.0, 16_000, &mut rng)
            .unwrap()
            .samples
            .iter()
            .all(|x| x.abs() <= 1.0));
    }

    #[test]
    fn clip_and_pad() {
        let b = AudioBuffer::new(vec![0.5; 10], 16_000);
        let c = clip_to_one_second(&b);
        assert_eq!(c.len(), 16_000);
        assert_eq!(c.samples[9], 0.5);
        assert_eq!(c.samples[10], 0.0);
        assert_eq!(fit_to_length(&c, 3).samples, vec![0.5; 3]);
    }
}
