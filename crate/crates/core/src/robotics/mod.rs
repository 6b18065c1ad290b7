//! Locomotion wire protocol, ultrasonic time-of-flight geometry and servo sweeps.

mod codec;
mod geometry;
mod scan;
mod sweep;

pub use codec::{
    decode_locomotion, deframe_uart, encode_locomotion, frame_uart, uart_transfer_time_s, CodecError, Deframer,
    Direction, LocomotionCommand, BITS_PER_BYTE_8N1, DEFAULT_BAUD, RESERVED_MASK,
};
pub use geometry::{
    beam_components, max_sampling_rate, tof_distance, tof_for_distance, BeamMode, GeometryError, C_AIR_MPS,
    D_MAX_M, THETA_MAX_DEG,
};
pub use scan::{
    classify_echo, scan_to_points, scan_to_points_sequential, write_scan_csv, Classification, RawEcho, ScanPoint,
};
pub use sweep::{sweep_schedule, SweepConfig, SweepError, SweepStop};
