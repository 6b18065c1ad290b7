//! Real-time multimodal dataflow runtime.
//!
//! Nodes exchange immutable, timestamped [`Packet`]s over lossy or lossless
//! [`Stream`]s. Streams can be gated by [`Latch`]es driven by bit-valued control
//! streams (typically produced by an attention node such as a keyword spotter),
//! and watched by passive [`Watchdog`]s. On top of the runtime sit a skill
//! registry and slot-filling skill manager, plus the deterministic kernels an
//! assistant robot pipeline needs:
//!
//! - [`dsp`]: PCM/WAV I/O, 3:1 resampling, log-Mel features, noise mixing.
//! - [`perception`]: embedding distances, identification, int8 quantization,
//!   image standardization and parameter counting.
//! - [`robotics`]: locomotion wire codec, time-of-flight geometry and servo sweeps.
//!
//! Data-parallel kernels use rayon when the `parallel` feature (default) is
//! enabled; every such kernel also has a `*_sequential` twin that is always
//! available and produces identical results.

// `!(x >= lo)` style checks deliberately reject NaN alongside out-of-range values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod dsp;
pub mod flowcore;
pub mod perception;
pub mod robotics;
pub mod skills;

pub use flowcore::{
    Clock, Latch, LatchState, Packet, PushOutcome, Stream, StreamPolicy, Timestamp, VirtualClock,
    Watchdog, WatchdogConfig,
};
