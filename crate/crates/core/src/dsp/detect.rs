use crate::flowcore::{Detector, DetectorError};

pub fn rms(window: &[f64]) -> f64 {
    super::augment::mean_square(window).sqrt()
}

/// 1 iff RMS ≥ threshold. An empty window is silence.
pub fn rms_detect(window: &[f64], threshold: f64) -> bool {
    !window.is_empty() && rms(window) >= threshold
}

/// Energy gate used as the default attention detector.
#[derive(Debug, Clone, Copy)]
pub struct RmsDetector {
    pub threshold: f64,
}

impl Detector<[f64]> for RmsDetector {
    fn detect(&mut self, window: &[f64]) -> Result<bool, DetectorError> {
        if window.is_empty() {
            return Err(DetectorError("empty window".into()));
        }
        Ok(rms_detect(window, self.threshold))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flowcore::attention_decide;

    #[test]
    fn examples() {
        assert!(!rms_detect(&[0.0; 100], 0.1));
        assert!(rms_detect(&[0.5; 100], 0.1));
        let square: Vec<f64> = (0..100).map(|i| if i % 2 == 0 { 1.0 } else { -1.0 }).collect();
        assert_eq!(rms(&square), 1.0);
        assert!(rms_detect(&square, 0.1));
    }

    #[test]
    fn sine_rms() {
        let a = 0.8;
        let n = 16_000;
        let x: Vec<f64> = (0..n)
            .map(|i| a * (2.0 * std::f64::consts::PI * 100.0 * i as f64 / n as f64).sin())
            .collect();
        assert!((rms(&x) - a / 2f64.sqrt()).abs() < 1e-3);
    }

    #[test]
    fn as_attention_detector() {
        let mut d = RmsDetector { threshold: 0.1 };
        assert!(!attention_decide::<[f64]>(&mut d, &[0.0; 4]).bit);
        let fail = attention_decide::<[f64]>(&mut d, &[]);
        assert!(!fail.bit && fail.error.is_some());
    }
}
