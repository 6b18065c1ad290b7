use std::sync::Arc;

use ndarray::Array2;
use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use super::{AudioBuffer, DspError};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LogMelConfig {
    pub sample_rate_hz: u32,
    pub n_mels: usize,
    pub frame_len_samples: usize,
    pub hop_samples: usize,
    pub fft_size: usize,
    pub fmin_hz: f64,
    pub fmax_hz: f64,
    /// Energies are clamped to at least this before the natural log.
    pub log_floor: f64,
}

impl Default for LogMelConfig {
    /// 25 ms frames, 10 ms hop, 512-point FFT, 40 bands over 20-7600 Hz at 16 kHz.
    fn default() -> Self {
        Self {
            sample_rate_hz: 16_000,
            n_mels: 40,
            frame_len_samples: 400,
            hop_samples: 160,
            fft_size: 512,
            fmin_hz: 20.0,
            fmax_hz: 7_600.0,
            log_floor: 1e-10,
        }
    }
}

impl LogMelConfig {
    pub fn validate(&self) -> Result<(), DspError> {
        let bad = |m: &str| Err(DspError::Config(m.to_string()));
        if self.n_mels == 0 {
            return bad("n_mels must be >= 1");
        }
        if self.frame_len_samples == 0 || self.hop_samples == 0 {
            return bad("frame and hop must be >= 1");
        }
        if self.fft_size < self.frame_len_samples {
            return bad("fft_size must be >= frame_len_samples");
        }
        if !(0.0 <= self.fmin_hz && self.fmin_hz < self.fmax_hz && self.fmax_hz <= self.sample_rate_hz as f64 / 2.0)
        {
            return bad("need 0 <= fmin < fmax <= sample_rate/2");
        }
        if !(self.log_floor > 0.0) {
            return bad("log_floor must be > 0");
        }
        Ok(())
    }

    pub fn frames_for(&self, n: usize) -> usize {
        if n < self.frame_len_samples {
            0
        } else {
            (n - self.frame_len_samples) / self.hop_samples + 1
        }
    }
}

pub fn hz_to_mel(f: f64) -> f64 {
    2595.0 * (1.0 + f / 700.0).log10()
}

pub fn mel_to_hz(m: f64) -> f64 {
    700.0 * (10f64.powf(m / 2595.0) - 1.0)
}

/// Band edges in Hz: `n_mels + 2` points equally spaced on the mel scale.
pub fn mel_edges(config: &LogMelConfig) -> Vec<f64> {
    let (lo, hi) = (hz_to_mel(config.fmin_hz), hz_to_mel(config.fmax_hz));
    let n = config.n_mels + 1;
    (0..=n)
        .map(|i| mel_to_hz(lo + (hi - lo) * i as f64 / n as f64))
        .collect()
}

/// Centre frequency of band `k`.
pub fn band_centre_hz(config: &LogMelConfig, k: usize) -> f64 {
    mel_edges(config)[k + 1]
}

/// Triangular filters, `n_mels × (fft_size/2 + 1)`, peak weight 1.
pub fn mel_filterbank(config: &LogMelConfig) -> Array2<f64> {
    let bins = config.fft_size / 2 + 1;
    let edges = mel_edges(config);
    let bin_hz = config.sample_rate_hz as f64 / config.fft_size as f64;
    Array2::from_shape_fn((config.n_mels, bins), |(m, b)| {
        let f = b as f64 * bin_hz;
        let (l, c, r) = (edges[m], edges[m + 1], edges[m + 2]);
        if f <= l || f >= r {
            0.0
        } else if f <= c {
            (f - l) / (c - l)
        } else {
            (r - f) / (r - c)
        }
    })
}

/// Periodic Hann window.
pub fn hann(n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| 0.5 - 0.5 * (2.0 * std::f64::consts::PI * i as f64 / n as f64).cos())
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct LogMelFeature {
    /// frames × n_mels natural-log energies.
    pub matrix: Array2<f64>,
    /// Start time of each frame in seconds.
    pub frame_times: Vec<f64>,
}

/// Precomputed window, filterbank and FFT plan for one configuration.
pub struct LogMelExtractor {
    config: LogMelConfig,
    window: Vec<f64>,
    filterbank: Array2<f64>,
    fft: Arc<dyn Fft<f64>>,
}

impl LogMelExtractor {
    pub fn new(config: LogMelConfig) -> Result<Self, DspError> {
        config.validate()?;
        Ok(Self {
            window: hann(config.frame_len_samples),
            filterbank: mel_filterbank(&config),
            fft: FftPlanner::new().plan_fft_forward(config.fft_size),
            config,
        })
    }

    pub fn config(&self) -> &LogMelConfig {
        &self.config
    }

    pub fn filterbank(&self) -> &Array2<f64> {
        &self.filterbank
    }

    fn frame(&self, samples: &[f64], index: usize) -> Vec<f64> {
        let c = &self.config;
        let start = index * c.hop_samples;
        let mut buf = vec![Complex::new(0.0, 0.0); c.fft_size];
        for (i, (x, w)) in samples[start..start + c.frame_len_samples]
            .iter()
            .zip(&self.window)
            .enumerate()
        {
            buf[i].re = x * w;
        }
        self.fft.process(&mut buf);
        let power: Vec<f64> = buf[..c.fft_size / 2 + 1].iter().map(|z| z.norm_sqr()).collect();
        self.filterbank
            .rows()
            .into_iter()
            .map(|row| {
                let e: f64 = row.iter().zip(&power).map(|(w, p)| w * p).sum();
                e.max(c.log_floor).ln()
            })
            .collect()
    }

    fn check(&self, buffer: &AudioBuffer) -> Result<usize, DspError> {
        if buffer.sample_rate_hz != self.config.sample_rate_hz {
            return Err(DspError::RateMismatch {
                expected: self.config.sample_rate_hz,
                got: buffer.sample_rate_hz,
            });
        }
        match self.config.frames_for(buffer.len()) {
            0 => Err(DspError::TooShort {
                needed: self.config.frame_len_samples,
                got: buffer.len(),
            }),
            n => Ok(n),
        }
    }

    fn assemble(&self, rows: Vec<Vec<f64>>) -> LogMelFeature {
        let n = rows.len();
        let frame_times = (0..n)
            .map(|i| (i * self.config.hop_samples) as f64 / self.config.sample_rate_hz as f64)
            .collect();
        let matrix = Array2::from_shape_vec((n, self.config.n_mels), rows.into_iter().flatten().collect())
            .expect("rows have n_mels entries");
        LogMelFeature { matrix, frame_times }
    }

    pub fn compute_sequential(&self, buffer: &AudioBuffer) -> Result<LogMelFeature, DspError> {
        let n = self.check(buffer)?;
        let rows = (0..n).map(|i| self.frame(&buffer.samples, i)).collect();
        Ok(self.assemble(rows))
    }

    /// `frames = floor((N - frame_len)/hop) + 1` rows of `n_mels` log energies.
    pub fn compute(&self, buffer: &AudioBuffer) -> Result<LogMelFeature, DspError> {
        #[cfg(feature = "parallel")]
        {
            use rayon::prelude::*;
            let n = self.check(buffer)?;
            let rows = (0..n)
                .into_par_iter()
                .map(|i| self.frame(&buffer.samples, i))
                .collect();
            Ok(self.assemble(rows))
        }
        #[cfg(not(feature = "parallel"))]
        {
            self.compute_sequential(buffer)
        }
    }

    pub fn compute_batch_sequential(&self, buffers: &[AudioBuffer]) -> Result<Vec<LogMelFeature>, DspError> {
        buffers.iter().map(|b| self.compute_sequential(b)).collect()
    }

    /// One feature matrix per buffer, in input order.
    pub fn compute_batch(&self, buffers: &[AudioBuffer]) -> Result<Vec<LogMelFeature>, DspError> {
        #[cfg(feature = "parallel")]
        {
            use rayon::prelude::*;
            buffers.par_iter().map(|b| self.compute_sequential(b)).collect()
        }
        #[cfg(not(feature = "parallel"))]
        {
            self.compute_batch_sequential(buffers)
        }
    }
}

pub fn logmel(buffer: &AudioBuffer, config: &LogMelConfig) -> Result<LogMelFeature, DspError> {
    LogMelExtractor::new(*config)?.compute(buffer)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_shape() {
        let f = logmel(&AudioBuffer::new(vec![0.0; 16_000], 16_000), &LogMelConfig::default()).unwrap();
        assert_eq!(f.matrix.dim(), (98, 40));
        let floor = 1e-10f64.ln();
        assert!(f.matrix.iter().all(|v| *v == floor));
        assert_eq!(f.frame_times[1], 0.01);
    }

    #[test]
    fn too_short_and_bad_config() {
        let c = LogMelConfig::default();
        assert!(matches!(
            logmel(&AudioBuffer::new(vec![0.0; 399], 16_000), &c),
            Err(DspError::TooShort { .. })
        ));
        let bad = LogMelConfig {
            fmax_hz: 9_000.0,
            ..c
        };
        assert!(bad.validate().is_err());
        let bad = LogMelConfig { fft_size: 256, ..c };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn mel_scale_round_trip() {
        for f in [0.0, 20.0, 700.0, 7600.0] {
            assert!((mel_to_hz(hz_to_mel(f)) - f).abs() < 1e-9);
        }
        assert!((hz_to_mel(700.0) - 2595.0 * 2f64.log10()).abs() < 1e-12);
    }

    #[test]
    fn filterbank_peaks_at_centres() {
        let c = LogMelConfig::default();
        let fb = mel_filterbank(&c);
        assert_eq!(fb.dim(), (40, 257));
        assert!(fb.iter().all(|w| (0.0..=1.0).contains(w)));
        assert!(fb.rows().into_iter().all(|r| r.iter().any(|w| *w > 0.0)));
    }

    #[test]
    fn sequential_and_parallel_agree() {
        let x: Vec<f64> = (0..16_000).map(|i| (i as f64 * 0.37).sin() * 0.3).collect();
        let b = AudioBuffer::new(x, 16_000);
        let e = LogMelExtractor::new(LogMelConfig::default()).unwrap();
        assert_eq!(e.compute(&b).unwrap(), e.compute_sequential(&b).unwrap());
    }
}
