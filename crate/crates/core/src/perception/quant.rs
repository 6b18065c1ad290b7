use serde::{Deserialize, Serialize};

use super::PerceptionError;

/// `real = (q − zero_point) · scale`, scale > 0.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuantParams {
    scale: f64,
    zero_point: i32,
}

impl QuantParams {
    pub fn new(scale: f64, zero_point: i32) -> Result<Self, PerceptionError> {
        if !(scale > 0.0 && scale.is_finite()) {
            return Err(PerceptionError::Scale(scale));
        }
        Ok(Self { scale, zero_point })
    }

    /// Zero point fixed at 0.
    pub fn symmetric(scale: f64) -> Result<Self, PerceptionError> {
        Self::new(scale, 0)
    }

    /// Symmetric scale covering `[-max_abs, max_abs]` with 127 steps per side.
    pub fn symmetric_for_range(max_abs: f64) -> Result<Self, PerceptionError> {
        Self::symmetric(max_abs / 127.0)
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn zero_point(&self) -> i32 {
        self.zero_point
    }

    pub fn quantize(&self, x: f64) -> i8 {
        quantize(x, self)
    }

    pub fn dequantize(&self, q: i8) -> f64 {
        dequantize(q, self)
    }

    /// Reals whose round trip stays within scale/2.
    pub fn representable(&self, x: f64) -> bool {
        let lo = (i8::MIN as i32 - self.zero_point) as f64 * self.scale;
        let hi = (i8::MAX as i32 - self.zero_point) as f64 * self.scale;
        (lo - self.scale / 2.0..=hi + self.scale / 2.0).contains(&x)
    }
}

/// `clamp(round(x/scale) + zp, −128, 127)`, rounding half away from zero.
pub fn quantize(x: f64, p: &QuantParams) -> i8 {
    let q = (x / p.scale).round() + p.zero_point as f64;
    q.clamp(i8::MIN as f64, i8::MAX as f64) as i8
}

pub fn dequantize(q: i8, p: &QuantParams) -> f64 {
    (q as i32 - p.zero_point) as f64 * p.scale
}

pub fn quantize_tensor_sequential(xs: &[f64], p: &QuantParams) -> Vec<i8> {
    xs.iter().map(|&x| quantize(x, p)).collect()
}

pub fn quantize_tensor(xs: &[f64], p: &QuantParams) -> Vec<i8> {
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        xs.par_iter().map(|&x| quantize(x, p)).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        quantize_tensor_sequential(xs, p)
    }
}

pub fn dequantize_tensor_sequential(qs: &[i8], p: &QuantParams) -> Vec<f64> {
    qs.iter().map(|&q| dequantize(q, p)).collect()
}

pub fn dequantize_tensor(qs: &[i8], p: &QuantParams) -> Vec<f64> {
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        qs.par_iter().map(|&q| dequantize(q, p)).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        dequantize_tensor_sequential(qs, p)
    }
}
