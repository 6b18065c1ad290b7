use std::io;

use serde::{Deserialize, Serialize};

use super::geometry::{beam_components, tof_distance, BeamMode, GeometryError};
use super::sweep::SweepConfig;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RawEcho {
    pub theta_deg: f64,
    /// Round-trip time; `None` when nothing came back.
    pub tof_s: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Classification {
    NoEcho,
    Climbable,
    Obstacle,
}

/// One classified scan stop. Distance fields are `None` for `NoEcho`; `d_y_m`
/// is also `None` where the beam model is unbounded (tangent at 90°).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScanPoint {
    pub theta_deg: f64,
    pub time_of_flight_s: Option<f64>,
    pub d_ideal_m: Option<f64>,
    pub d_x_m: Option<f64>,
    pub d_y_m: Option<f64>,
    pub classification: Classification,
}

impl ScanPoint {
    fn no_echo(theta_deg: f64, tof: Option<f64>) -> Self {
        Self {
            theta_deg,
            time_of_flight_s: tof,
            d_ideal_m: None,
            d_x_m: None,
            d_y_m: None,
            classification: Classification::NoEcho,
        }
    }
}

pub fn classify_echo(
    raw: &RawEcho,
    config: &SweepConfig,
    climb_height_m: f64,
    mode: BeamMode,
) -> Result<ScanPoint, GeometryError> {
    let Some(t) = raw.tof_s else {
        // still reject angles the servo cannot reach
        beam_components(0.0, raw.theta_deg, BeamMode::Sine)?;
        return Ok(ScanPoint::no_echo(raw.theta_deg, None));
    };
    let d = tof_distance(t, config.c_air_mps)?;
    if d > config.d_max_m {
        beam_components(0.0, raw.theta_deg, BeamMode::Sine)?;
        return Ok(ScanPoint::no_echo(raw.theta_deg, Some(t)));
    }
    let (d_x, d_y) = match beam_components(d, raw.theta_deg, mode) {
        Ok((x, y)) => (x, Some(y)),
        Err(GeometryError::Singular(_)) => (d * raw.theta_deg.to_radians().cos(), None),
        Err(e) => return Err(e),
    };
    let classification = match d_y {
        Some(y) if y <= climb_height_m => Classification::Climbable,
        _ => Classification::Obstacle,
    };
    Ok(ScanPoint {
        theta_deg: raw.theta_deg,
        time_of_flight_s: Some(t),
        d_ideal_m: Some(d),
        d_x_m: Some(d_x),
        d_y_m: d_y,
        classification,
    })
}

pub fn scan_to_points_sequential(
    raw: &[RawEcho],
    config: &SweepConfig,
    climb_height_m: f64,
    mode: BeamMode,
) -> Result<Vec<ScanPoint>, GeometryError> {
    raw.iter()
        .map(|r| classify_echo(r, config, climb_height_m, mode))
        .collect()
}

/// Classifies every echo; output order matches input order.
pub fn scan_to_points(
    raw: &[RawEcho],
    config: &SweepConfig,
    climb_height_m: f64,
    mode: BeamMode,
) -> Result<Vec<ScanPoint>, GeometryError> {
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        raw.par_iter()
            .map(|r| classify_echo(r, config, climb_height_m, mode))
            .collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        scan_to_points_sequential(raw, config, climb_height_m, mode)
    }
}

#[derive(Serialize)]
struct CsvRow {
    theta_deg: f64,
    #[serde(rename = "T_s")]
    t_s: Option<f64>,
    d_ideal_m: Option<f64>,
    d_x_m: Option<f64>,
    d_y_m: Option<f64>,
    classification: Classification,
}

/// Columns: theta_deg, T_s, d_ideal_m, d_x_m, d_y_m, classification. Absent values are empty.
pub fn write_scan_csv<W: io::Write>(points: &[ScanPoint], out: W) -> Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(out);
    for p in points {
        w.serialize(CsvRow {
            theta_deg: p.theta_deg,
            t_s: p.time_of_flight_s,
            d_ideal_m: p.d_ideal_m,
            d_x_m: p.d_x_m,
            d_y_m: p.d_y_m,
            classification: p.classification,
        })?;
    }
    w.flush()?;
    Ok(())
}
