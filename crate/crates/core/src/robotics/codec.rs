use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Wheel side and rotation sense, in wire-code order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    LeftForward = 0,
    LeftBackward = 1,
    RightForward = 2,
    RightBackward = 3,
}

impl Direction {
    pub const ALL: [Direction; 4] = [
        Direction::LeftForward,
        Direction::LeftBackward,
        Direction::RightForward,
        Direction::RightBackward,
    ];

    pub fn code(self) -> u16 {
        self as u16
    }

    pub fn from_code(code: u16) -> Option<Self> {
        Self::ALL.get(code as usize).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            Direction::LeftForward => "left_forward",
            Direction::LeftBackward => "left_backward",
            Direction::RightForward => "right_forward",
            Direction::RightBackward => "right_backward",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|d| d.name() == s)
    }
}

/// One wheel-side drive instruction. Speed 0 stops that side whatever the direction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct LocomotionCommand {
    pub direction: Direction,
    pub speed: u8,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum CodecError {
    #[error("speed {0} outside 0..=255")]
    SpeedOutOfRange(i64),
    #[error("malformed packet {0:#06x}: reserved bits set")]
    MalformedPacket(u16),
}

pub const RESERVED_MASK: u16 = 0xFC00;
const DIRECTION_SHIFT: u16 = 8;

impl LocomotionCommand {
    pub fn new(direction: Direction, speed: i64) -> Result<Self, CodecError> {
        let speed = u8::try_from(speed).map_err(|_| CodecError::SpeedOutOfRange(speed))?;
        Ok(Self { direction, speed })
    }

    pub fn stop(direction: Direction) -> Self {
        Self { direction, speed: 0 }
    }

    pub fn is_stop(&self) -> bool {
        self.speed == 0
    }
}

/// Bits 15..10 reserved (zero), 9..8 direction code, 7..0 speed.
pub fn encode_locomotion(cmd: LocomotionCommand) -> u16 {
    (cmd.direction.code() << DIRECTION_SHIFT) | cmd.speed as u16
}

pub fn decode_locomotion(word: u16) -> Result<LocomotionCommand, CodecError> {
    if word & RESERVED_MASK != 0 {
        return Err(CodecError::MalformedPacket(word));
    }
    let direction = Direction::from_code(word >> DIRECTION_SHIFT).expect("two bits");
    Ok(LocomotionCommand {
        direction,
        speed: (word & 0xFF) as u8,
    })
}

/// Wire bytes of one word, low byte first.
pub fn frame_uart(word: u16) -> [u8; 2] {
    word.to_le_bytes()
}

/// Reassembles little-endian words from an arbitrary chunking of the byte stream.
#[derive(Debug, Clone, Default)]
pub struct Deframer {
    pending: Option<u8>,
}

impl Deframer {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, bytes: &[u8]) -> Vec<u16> {
        let mut out = Vec::with_capacity(bytes.len().div_ceil(2));
        for &b in bytes {
            match self.pending.take() {
                Some(lo) => out.push(u16::from_le_bytes([lo, b])),
                None => self.pending = Some(b),
            }
        }
        out
    }

    pub fn pending(&self) -> usize {
        self.pending.is_some() as usize
    }
}

/// One-shot deframing; returns the words and the unpaired trailing byte, if any.
pub fn deframe_uart(bytes: &[u8]) -> (Vec<u16>, Option<u8>) {
    let mut d = Deframer::new();
    let words = d.push(bytes);
    (words, d.pending)
}

pub const DEFAULT_BAUD: u32 = 115_200;
/// 8N1: start bit, 8 data bits, stop bit.
pub const BITS_PER_BYTE_8N1: u32 = 10;

/// Line time for `bytes` bytes at `baud`, in seconds.
pub fn uart_transfer_time_s(bytes: usize, baud: u32) -> f64 {
    (bytes as u64 * BITS_PER_BYTE_8N1 as u64) as f64 / baud as f64
}
