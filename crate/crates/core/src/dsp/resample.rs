use std::sync::OnceLock;

use super::{AudioBuffer, DspError};

pub const RESAMPLER_TAPS: usize = 97;
pub const RESAMPLER_CUTOFF_HZ: f64 = 8_000.0;
const KAISER_BETA: f64 = 5.65;

/// Zeroth-order modified Bessel function of the first kind (power series).
fn bessel_i0(x: f64) -> f64 {
    let q = x * x / 4.0;
    let (mut sum, mut term, mut k) = (1.0, 1.0, 1.0);
    while term > sum * 1e-17 {
        term *= q / (k * k);
        sum += term;
        k += 1.0;
    }
    sum
}

/// Kaiser-windowed sinc low-pass at `cutoff_hz`, normalized to unit DC gain.
pub fn lowpass_taps(taps: usize, cutoff_hz: f64, sample_rate_hz: f64, beta: f64) -> Vec<f64> {
    let fc = cutoff_hz / sample_rate_hz;
    let mid = (taps - 1) as f64 / 2.0;
    let denom = bessel_i0(beta);
    let mut h: Vec<f64> = (0..taps)
        .map(|i| {
            let t = i as f64 - mid;
            let sinc = if t == 0.0 {
                2.0 * fc
            } else {
                (2.0 * std::f64::consts::PI * fc * t).sin() / (std::f64::consts::PI * t)
            };
            let r = t / mid;
            sinc * bessel_i0(beta * (1.0 - r * r).max(0.0).sqrt()) / denom
        })
        .collect();
    let sum: f64 = h.iter().sum();
    h.iter_mut().for_each(|v| *v /= sum);
    h
}

fn taps() -> &'static [f64] {
    static TAPS: OnceLock<Vec<f64>> = OnceLock::new();
    TAPS.get_or_init(|| lowpass_taps(RESAMPLER_TAPS, RESAMPLER_CUTOFF_HZ, 48_000.0, KAISER_BETA))
}

fn output_sample(x: &[f64], h: &[f64], k: usize) -> f64 {
    let half = (h.len() / 2) as isize;
    let centre = 3 * k as isize;
    let mut acc = 0.0;
    for (j, &c) in h.iter().enumerate() {
        let i = centre + j as isize - half;
        if i >= 0 && (i as usize) < x.len() {
            acc += c * x[i as usize];
        }
    }
    acc
}

fn check(buffer: &AudioBuffer) -> Result<(), DspError> {
    if buffer.sample_rate_hz != 48_000 {
        return Err(DspError::RateMismatch {
            expected: 48_000,
            got: buffer.sample_rate_hz,
        });
    }
    Ok(())
}

pub fn resample_3to1_sequential(buffer: &AudioBuffer) -> Result<AudioBuffer, DspError> {
    check(buffer)?;
    let h = taps();
    let out = (0..buffer.len() / 3)
        .map(|k| output_sample(&buffer.samples, h, k))
        .collect();
    Ok(AudioBuffer::new(out, 16_000))
}

/// 48 kHz → 16 kHz: zero-phase low-pass then keep every third sample.
/// Output length is `floor(N / 3)`; the input is treated as zero outside its span.
pub fn resample_3to1(buffer: &AudioBuffer) -> Result<AudioBuffer, DspError> {
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        check(buffer)?;
        let h = taps();
        let out = (0..buffer.len() / 3)
            .into_par_iter()
            .map(|k| output_sample(&buffer.samples, h, k))
            .collect();
        Ok(AudioBuffer::new(out, 16_000))
    }
    #[cfg(not(feature = "parallel"))]
    {
        resample_3to1_sequential(buffer)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn taps_are_symmetric_unit_gain() {
        let h = taps();
        assert_eq!(h.len(), RESAMPLER_TAPS);
        assert!((h.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        for i in 0..h.len() / 2 {
            assert!((h[i] - h[h.len() - 1 - i]).abs() < 1e-15);
        }
    }

    #[test]
    fn i0_known_values() {
        assert_eq!(bessel_i0(0.0), 1.0);
        assert!((bessel_i0(1.0) - 1.266_065_877_752_008_4).abs() < 1e-14);
    }

    #[test]
    fn zeros_and_length() {
        let out = resample_3to1(&AudioBuffer::new(vec![0.0; 48_000], 48_000)).unwrap();
        assert_eq!(out.len(), 16_000);
        assert_eq!(out.sample_rate_hz, 16_000);
        assert!(out.samples.iter().all(|x| *x == 0.0));
        assert_eq!(resample_3to1(&AudioBuffer::new(vec![0.0; 10], 48_000)).unwrap().len(), 3);
    }

    #[test]
    fn wrong_rate() {
        assert!(resample_3to1(&AudioBuffer::new(vec![0.0; 3], 16_000)).is_err());
    }

    #[test]
    fn parallel_matches_sequential() {
        let x: Vec<f64> = (0..3001).map(|i| ((i * 7919) % 101) as f64 / 101.0 - 0.5).collect();
        let b = AudioBuffer::new(x, 48_000);
        assert_eq!(resample_3to1(&b).unwrap(), resample_3to1_sequential(&b).unwrap());
    }
}
