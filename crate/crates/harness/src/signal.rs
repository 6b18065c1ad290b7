use std::sync::Arc;

use latchflow::flowcore::{PacketData, SampleWindow};
use latchflow::skills::Interpretation;

/// A block of captured samples from one device.
#[derive(Debug, Clone, PartialEq)]
pub struct AudioChunk {
    pub device: String,
    pub start_sample: u64,
    pub sample_rate_hz: u32,
    pub samples: Arc<[f64]>,
}

/// Payload carried by every stream of the harness pipeline.
#[derive(Debug, Clone, PartialEq)]
pub enum Signal {
    Bit(bool),
    Index(u64),
    Audio(AudioChunk),
    Window(SampleWindow<f64>),
    Interpretation(Interpretation),
    /// One 16-bit locomotion packet bound for the motor controller.
    Word(u16),
    Text(String),
}

impl Signal {
    pub fn kind(&self) -> &'static str {
        match self {
            Signal::Bit(_) => "bit",
            Signal::Index(_) => "index",
            Signal::Audio(_) => "audio",
            Signal::Window(_) => "window",
            Signal::Interpretation(_) => "interpretation",
            Signal::Word(_) => "word",
            Signal::Text(_) => "text",
        }
    }
}

impl PacketData for Signal {
    fn from_bit(bit: bool) -> Self {
        Signal::Bit(bit)
    }

    fn as_bit(&self) -> Option<bool> {
        match self {
            Signal::Bit(b) => Some(*b),
            _ => None,
        }
    }

    fn from_index(index: u64) -> Self {
        Signal::Index(index)
    }
}
