//! Audio front end: PCM/WAV I/O, 3:1 resampling, log-Mel features,
//! noise and shift augmentation, and an RMS energy detector.

mod augment;
mod detect;
mod logmel;
mod pcm;
mod resample;

use thiserror::Error;

pub use augment::{
    clip_to_one_second, fit_to_length, mean_square, mix_noise_at_snr, random_shift, shift, white_noise_gaussian,
    white_noise_uniform, NoiseMix,
};
pub use detect::{rms, rms_detect, RmsDetector};
pub use logmel::{
    band_centre_hz, hann, hz_to_mel, logmel, mel_edges, mel_filterbank, mel_to_hz, LogMelConfig, LogMelExtractor,
    LogMelFeature,
};
pub use pcm::{
    i16_to_sample, pcm16_decode, pcm16_encode, read_wav, read_wav_from, sample_to_i16, write_wav, write_wav_to,
};
pub use resample::{lowpass_taps, resample_3to1, resample_3to1_sequential, RESAMPLER_CUTOFF_HZ, RESAMPLER_TAPS};

/// Mono samples, nominally in [-1, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct AudioBuffer {
    pub samples: Vec<f64>,
    pub sample_rate_hz: u32,
}

impl AudioBuffer {
    pub fn new(samples: Vec<f64>, sample_rate_hz: u32) -> Self {
        Self {
            samples,
            sample_rate_hz,
        }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration_s(&self) -> f64 {
        self.len() as f64 / self.sample_rate_hz as f64
    }

    /// `amplitude·sin(2πft)` for `duration_s` seconds.
    pub fn sine(freq_hz: f64, amplitude: f64, duration_s: f64, sample_rate_hz: u32) -> Self {
        let n = (duration_s * sample_rate_hz as f64).round() as usize;
        let w = 2.0 * std::f64::consts::PI * freq_hz / sample_rate_hz as f64;
        Self::new((0..n).map(|i| amplitude * (w * i as f64).sin()).collect(), sample_rate_hz)
    }
}

#[derive(Debug, Error)]
pub enum DspError {
    #[error("PCM16 data must have an even byte length, got {0}")]
    OddByteLength(usize),
    #[error("expected {expected} Hz audio, got {got} Hz")]
    RateMismatch { expected: u32, got: u32 },
    #[error("need at least {needed} samples, got {got}")]
    TooShort { needed: usize, got: usize },
    #[error("{0} has zero power")]
    ZeroPower(&'static str),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("unsupported WAV: {0}")]
    UnsupportedWav(String),
    #[error("WAV: {0}")]
    Wav(#[from] hound::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
