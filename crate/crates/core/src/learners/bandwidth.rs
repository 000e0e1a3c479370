use crate::data::RawSamples;
use crate::error::{Error, Result};

/// Silverman's rule of thumb, `0.9 · min(sd, IQR/1.34) · N^(-1/5)`.
///
/// Quartiles use linear interpolation between order statistics. When the
/// IQR is zero the standard deviation is used alone.
pub fn silverman_bandwidth(raw: &RawSamples) -> Result<f64> {
    let values = raw.values();
    let n = values.len();
    if n < 2 {
        return Err(Error::DegenerateSpread);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    let sd = var.sqrt();
    if !(sd > 0.0) {
        return Err(Error::DegenerateSpread);
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let iqr = quantile(&sorted, 0.75) - quantile(&sorted, 0.25);
    let spread = if iqr > 0.0 { sd.min(iqr / 1.34) } else { sd };
    Ok(0.9 * spread * (n as f64).powf(-0.2))
}

fn quantile(sorted: &[f64], p: f64) -> f64 {
    let pos = p * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}
