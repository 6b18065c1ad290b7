use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("detector failed: {0}")]
pub struct DetectorError(pub String);

/// Pluggable classifier deciding whether a window deserves downstream attention.
pub trait Detector<W: ?Sized>: Send {
    fn detect(&mut self, window: &W) -> Result<bool, DetectorError>;
}

impl<W: ?Sized, F> Detector<W> for F
where
    F: FnMut(&W) -> Result<bool, DetectorError> + Send,
{
    fn detect(&mut self, window: &W) -> Result<bool, DetectorError> {
        self(window)
    }
}

/// Always answers with the same bit.
#[derive(Debug, Clone, Copy)]
pub struct ConstantDetector(pub bool);

impl<W: ?Sized> Detector<W> for ConstantDetector {
    fn detect(&mut self, _window: &W) -> Result<bool, DetectorError> {
        Ok(self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Decision {
    pub bit: bool,
    pub error: Option<DetectorError>,
}

/// Exactly one bit per window. A failing detector yields 0 so the gate stays shut.
pub fn attention_decide<W: ?Sized>(detector: &mut dyn Detector<W>, window: &W) -> Decision {
    match detector.detect(window) {
        Ok(bit) => Decision { bit, error: None },
        Err(e) => Decision {
            bit: false,
            error: Some(e),
        },
    }
}

/// Attention node state: a detector plus per-outcome counters.
pub struct AttentionNode<W: ?Sized> {
    detector: Box<dyn Detector<W>>,
    ones: u64,
    zeros: u64,
    errors: u64,
}

impl<W: ?Sized> AttentionNode<W> {
    pub fn new(detector: Box<dyn Detector<W>>) -> Self {
        Self {
            detector,
            ones: 0,
            zeros: 0,
            errors: 0,
        }
    }

    pub fn decide(&mut self, window: &W) -> Decision {
        let d = attention_decide(self.detector.as_mut(), window);
        if d.error.is_some() {
            self.errors += 1;
        }
        if d.bit {
            self.ones += 1;
        } else {
            self.zeros += 1;
        }
        d
    }

    pub fn counts(&self) -> (u64, u64, u64) {
        (self.ones, self.zeros, self.errors)
    }
}
