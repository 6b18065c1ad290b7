use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::geometry::{max_sampling_rate, C_AIR_MPS, D_MAX_M, THETA_MAX_DEG};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SweepConfig {
    pub theta_min_deg: f64,
    pub theta_max_deg: f64,
    pub step_deg: f64,
    pub servo_latency_s_per_60deg: f64,
    pub c_air_mps: f64,
    pub d_max_m: f64,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            theta_min_deg: 0.0,
            theta_max_deg: THETA_MAX_DEG,
            step_deg: 10.0,
            servo_latency_s_per_60deg: 0.14,
            c_air_mps: C_AIR_MPS,
            d_max_m: D_MAX_M,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
#[error("invalid sweep config: {0}")]
pub struct SweepError(pub String);

impl SweepConfig {
    pub fn with_step(step_deg: f64) -> Self {
        Self {
            step_deg,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), SweepError> {
        let err = |m: &str| Err(SweepError(m.to_string()));
        if !(0.0 <= self.theta_min_deg
            && self.theta_min_deg < self.theta_max_deg
            && self.theta_max_deg <= THETA_MAX_DEG)
        {
            return err("need 0 <= theta_min < theta_max <= 120");
        }
        if !(self.step_deg > 0.0 && self.step_deg.is_finite()) {
            return err("step_deg must be positive");
        }
        if !(self.servo_latency_s_per_60deg > 0.0) {
            return err("servo latency must be positive");
        }
        if !(self.c_air_mps > 0.0 && self.d_max_m > 0.0) {
            return err("c_air and d_max must be positive");
        }
        Ok(())
    }

    /// Seconds the servo needs to turn through `deg` degrees.
    pub fn travel_time_s(&self, deg: f64) -> f64 {
        deg.abs() * self.servo_latency_s_per_60deg / 60.0
    }

    /// Listening time per stop: one full round trip at `d_max`.
    pub fn dwell_s(&self) -> f64 {
        1.0 / max_sampling_rate(self.d_max_m, self.c_air_mps).expect("validated")
    }

    /// Stop angles from min to max; the last step is shortened to land on max.
    pub fn angles(&self) -> Vec<f64> {
        let span = self.theta_max_deg - self.theta_min_deg;
        let n = (span / self.step_deg + 1e-9).floor() as usize;
        let mut out: Vec<f64> = (0..=n)
            .map(|i| (self.theta_min_deg + i as f64 * self.step_deg).min(self.theta_max_deg))
            .collect();
        if self.theta_max_deg - out[n] > 1e-9 {
            out.push(self.theta_max_deg);
        } else {
            out[n] = self.theta_max_deg;
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepStop {
    pub theta_deg: f64,
    /// Cumulative servo travel up to this stop.
    pub travel_time_s: f64,
    /// Travel plus the dwells of all earlier stops: when this ping can fire.
    pub earliest_time_s: f64,
}

pub fn sweep_schedule(config: &SweepConfig) -> Result<Vec<SweepStop>, SweepError> {
    config.validate()?;
    let dwell = config.dwell_s();
    Ok(config
        .angles()
        .into_iter()
        .enumerate()
        .map(|(i, theta)| {
            // from the start angle, not summed per step, so the total is step-independent
            let travel = config.travel_time_s(theta - config.theta_min_deg);
            SweepStop {
                theta_deg: theta,
                travel_time_s: travel,
                earliest_time_s: travel + i as f64 * dwell,
            }
        })
        .collect())
}
