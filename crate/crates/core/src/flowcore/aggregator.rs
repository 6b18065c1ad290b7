use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Sliding-window slicing parameters, in samples.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AggregatorConfig {
    pub window_samples: usize,
    pub hop_samples: usize,
    pub sample_rate_hz: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AggregatorError {
    #[error("hop must satisfy 0 < hop <= window (hop={hop}, window={window})")]
    BadHop { hop: usize, window: usize },
    #[error("sample rate must be > 0")]
    ZeroRate,
    #[error("sample rate {got} Hz does not match configured {expected} Hz")]
    RateMismatch { expected: u32, got: u32 },
}

impl AggregatorConfig {
    /// Window and hop given as durations at `sample_rate_hz`.
    pub fn from_durations(window_ms: u32, hop_ms: u32, sample_rate_hz: u32) -> Self {
        let samples = |ms: u32| (ms as u64 * sample_rate_hz as u64 / 1000) as usize;
        Self {
            window_samples: samples(window_ms),
            hop_samples: samples(hop_ms),
            sample_rate_hz,
        }
    }

    pub fn validate(&self) -> Result<(), AggregatorError> {
        if self.hop_samples == 0 || self.hop_samples > self.window_samples {
            return Err(AggregatorError::BadHop {
                hop: self.hop_samples,
                window: self.window_samples,
            });
        }
        if self.sample_rate_hz == 0 {
            return Err(AggregatorError::ZeroRate);
        }
        Ok(())
    }

    /// Number of windows emitted once `total` samples have been fed.
    pub fn windows_after(&self, total: u64) -> u64 {
        let w = self.window_samples as u64;
        if total < w {
            0
        } else {
            (total - w) / self.hop_samples as u64 + 1
        }
    }
}

/// One complete window. `start_sample` is an absolute offset into the fed sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleWindow<S> {
    pub index: u64,
    pub start_sample: u64,
    pub sample_rate_hz: u32,
    pub samples: Arc<[S]>,
}

impl<S> SampleWindow<S> {
    pub fn start_secs(&self) -> f64 {
        self.start_sample as f64 / self.sample_rate_hz as f64
    }

    /// Exclusive end of the window's half-open time span.
    pub fn end_secs(&self) -> f64 {
        (self.start_sample + self.samples.len() as u64) as f64 / self.sample_rate_hz as f64
    }
}

/// Incremental slicer: emits every complete window whose start is a multiple
/// of the hop. Feeding in chunks yields exactly the windows of one batch feed.
#[derive(Debug, Clone)]
pub struct Aggregator<S> {
    config: AggregatorConfig,
    buffer: Vec<S>,
    buffer_start: u64,
    next_start: u64,
    total: u64,
    next_index: u64,
}

impl<S: Copy> Aggregator<S> {
    pub fn new(config: AggregatorConfig) -> Result<Self, AggregatorError> {
        config.validate()?;
        Ok(Self {
            config,
            buffer: Vec::with_capacity(config.window_samples),
            buffer_start: 0,
            next_start: 0,
            total: 0,
            next_index: 0,
        })
    }

    pub fn config(&self) -> &AggregatorConfig {
        &self.config
    }

    pub fn total_samples(&self) -> u64 {
        self.total
    }

    pub fn buffered(&self) -> usize {
        self.buffer.len()
    }

    pub fn feed(
        &mut self,
        samples: &[S],
        sample_rate_hz: u32,
    ) -> Result<Vec<SampleWindow<S>>, AggregatorError> {
        if sample_rate_hz != self.config.sample_rate_hz {
            return Err(AggregatorError::RateMismatch {
                expected: self.config.sample_rate_hz,
                got: sample_rate_hz,
            });
        }
        self.buffer.extend_from_slice(samples);
        self.total += samples.len() as u64;

        let window = self.config.window_samples as u64;
        let mut out = Vec::new();
        while self.next_start + window <= self.total {
            let lo = (self.next_start - self.buffer_start) as usize;
            let slice: Arc<[S]> = Arc::from(&self.buffer[lo..lo + window as usize]);
            out.push(SampleWindow {
                index: self.next_index,
                start_sample: self.next_start,
                sample_rate_hz,
                samples: slice,
            });
            self.next_index += 1;
            self.next_start += self.config.hop_samples as u64;
        }

        let consumed = (self.next_start - self.buffer_start) as usize;
        if consumed > 0 {
            self.buffer.drain(..consumed.min(self.buffer.len()));
            self.buffer_start = self.next_start;
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn kws() -> AggregatorConfig {
        AggregatorConfig {
            window_samples: 16_000,
            hop_samples: 4_000,
            sample_rate_hz: 16_000,
        }
    }

    #[test]
    fn one_second_quarter_hop() {
        assert_eq!(AggregatorConfig::from_durations(1000, 250, 16_000), kws());
        let mut agg = Aggregator::new(kws()).unwrap();
        let samples: Vec<f32> = (0..28_000).map(|i| i as f32).collect();
        let w = agg.feed(&samples, 16_000).unwrap();
        let starts: Vec<u64> = w.iter().map(|w| w.start_sample).collect();
        assert_eq!(starts, vec![0, 4_000, 8_000, 12_000]);
        assert_eq!(w[3].samples[0], 12_000.0);
        assert_eq!(w[3].samples.len(), 16_000);
        assert!(agg.buffered() < 16_000);
    }

    #[test]
    fn incomplete_window_emits_nothing() {
        let mut agg = Aggregator::new(kws()).unwrap();
        assert!(agg.feed(&vec![0.0f32; 15_999], 16_000).unwrap().is_empty());
    }

    #[test]
    fn incremental_then_one_more() {
        let mut agg = Aggregator::new(kws()).unwrap();
        assert_eq!(agg.feed(&vec![0.0f32; 16_000], 16_000).unwrap().len(), 1);
        let w = agg.feed(&vec![0.0f32; 4_000], 16_000).unwrap();
        assert_eq!(w.len(), 1);
        assert_eq!(w[0].index, 1);
        assert_eq!(w[0].start_sample, 4_000);
    }

    #[test]
    fn rate_mismatch() {
        let mut agg = Aggregator::<f32>::new(kws()).unwrap();
        assert_eq!(
            agg.feed(&[0.0], 48_000).unwrap_err(),
            AggregatorError::RateMismatch {
                expected: 16_000,
                got: 48_000
            }
        );
    }

    #[test]
    fn bad_hop() {
        let mut c = kws();
        c.hop_samples = 0;
        assert!(Aggregator::<f32>::new(c).is_err());
        c.hop_samples = 16_001;
        assert!(Aggregator::<f32>::new(c).is_err());
    }

    #[test]
    fn window_times_half_open() {
        let mut agg = Aggregator::new(kws()).unwrap();
        let w = agg.feed(&vec![0i16; 20_000], 16_000).unwrap();
        assert_eq!(w[1].start_secs(), 0.25);
        assert_eq!(w[1].end_secs(), 1.25);
    }
}
