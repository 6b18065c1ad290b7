use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const C_AIR_MPS: f64 = 346.0;
pub const D_MAX_M: f64 = 2.5;

#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum GeometryError {
    #[error("time of flight must be >= 0, got {0}")]
    NegativeTime(f64),
    #[error("speed of sound must be > 0, got {0}")]
    BadSpeed(f64),
    #[error("distance must be > 0, got {0}")]
    BadDistance(f64),
    #[error("angle {0} deg outside [0, 120]")]
    AngleOutOfRange(f64),
    #[error("tangent is unbounded at {0} deg")]
    Singular(f64),
}

/// How the vertical component is derived from the beam length.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BeamMode {
    /// d_y = d·tan θ, d_x = d·cos θ. Diverges at 90°.
    #[default]
    Tangent,
    /// d_y = d·sin θ, d_x = d·cos θ, so d_x² + d_y² = d².
    Sine,
}

/// d = c·T/2 (round trip).
pub fn tof_distance(t_s: f64, c_mps: f64) -> Result<f64, GeometryError> {
    if !(t_s >= 0.0) {
        return Err(GeometryError::NegativeTime(t_s));
    }
    if !(c_mps > 0.0) {
        return Err(GeometryError::BadSpeed(c_mps));
    }
    Ok(c_mps * t_s / 2.0)
}

/// Round-trip time for an echo from `d_m`.
pub fn tof_for_distance(d_m: f64, c_mps: f64) -> f64 {
    2.0 * d_m / c_mps
}

/// Highest ping rate that still hears an echo from `d_max_m`: c/(2·d_max).
pub fn max_sampling_rate(d_max_m: f64, c_mps: f64) -> Result<f64, GeometryError> {
    if !(d_max_m > 0.0) {
        return Err(GeometryError::BadDistance(d_max_m));
    }
    if !(c_mps > 0.0) {
        return Err(GeometryError::BadSpeed(c_mps));
    }
    Ok(c_mps / (2.0 * d_max_m))
}

pub const THETA_MAX_DEG: f64 = 120.0;
const SINGULAR_COS: f64 = 1e-12;

/// Returns `(d_x, d_y)` for a beam of length `d_ideal` tilted `theta_deg`.
pub fn beam_components(d_ideal: f64, theta_deg: f64, mode: BeamMode) -> Result<(f64, f64), GeometryError> {
    if !(0.0..=THETA_MAX_DEG).contains(&theta_deg) {
        return Err(GeometryError::AngleOutOfRange(theta_deg));
    }
    if !(d_ideal >= 0.0) {
        return Err(GeometryError::BadDistance(d_ideal));
    }
    let th = theta_deg.to_radians();
    let (s, c) = th.sin_cos();
    let d_x = d_ideal * c;
    let d_y = match mode {
        BeamMode::Tangent => {
            if c.abs() < SINGULAR_COS {
                return Err(GeometryError::Singular(theta_deg));
            }
            d_ideal * th.tan()
        }
        BeamMode::Sine => d_ideal * s,
    };
    Ok((d_x, d_y))
}
