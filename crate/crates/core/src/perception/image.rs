use super::PerceptionError;

/// Maps pixels to mean 128 and standard deviation 128 (population std),
/// before rounding half away from zero and clamping to [0, 255].
pub fn standardize(pixels: &[u8]) -> Result<Vec<f64>, PerceptionError> {
    if pixels.is_empty() {
        return Err(PerceptionError::EmptyImage);
    }
    let n = pixels.len() as f64;
    let mean = pixels.iter().map(|&p| p as f64).sum::<f64>() / n;
    let var = pixels.iter().map(|&p| (p as f64 - mean).powi(2)).sum::<f64>() / n;
    let std = var.sqrt();
    Ok(pixels
        .iter()
        .map(|&p| if std == 0.0 { 128.0 } else { (p as f64 - mean) / std * 128.0 + 128.0 })
        .collect())
}

/// A zero-variance image maps to all 128.
pub fn normalize_image(pixels: &[u8]) -> Result<Vec<u8>, PerceptionError> {
    Ok(standardize(pixels)?
        .into_iter()
        .map(|y| y.round().clamp(0.0, 255.0) as u8)
        .collect())
}
