//! First-order intensity statistics.

use serde::{Deserialize, Serialize};

use crate::error::{data_err, Error, Result};

pub const DEFAULT_BINS: usize = 64;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IntensityStats {
    /// Pearson kurtosis `m4 / m2²`; `None` for a constant sample.
    pub kurtosis: Option<f64>,
    /// Shannon entropy of the histogram, bits.
    pub entropy: f64,
    pub histogram: Vec<f64>,
}

impl IntensityStats {
    /// `Σ p²` over the histogram.
    pub fn energy(&self) -> f64 {
        self.histogram.iter().map(|p| p * p).sum()
    }
}

pub fn kurtosis(samples: &[f64]) -> Result<f64> {
    if samples.len() < 2 {
        return Err(Error::Undefined(format!("kurtosis needs ≥2 samples, got {}", samples.len())));
    }
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    let m2 = samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    let m4 = samples.iter().map(|x| (x - mean).powi(4)).sum::<f64>() / n;
    if m2 == 0.0 {
        return Err(Error::Undefined("kurtosis of a constant sample".into()));
    }
    Ok(m4 / (m2 * m2))
}

/// Normalized histogram with `bins` equal bins spanning `[min, max]`; the
/// maximum falls in the last bin. A constant sample fills bin 0.
pub fn histogram(samples: &[f64], bins: usize) -> Result<Vec<f64>> {
    if bins == 0 {
        return Err(Error::Config("histogram needs ≥1 bin".into()));
    }
    if samples.is_empty() {
        return Err(data_err("histogram of no samples"));
    }
    if samples.iter().any(|x| !x.is_finite()) {
        return Err(data_err("non-finite intensity"));
    }
    let lo = samples.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = samples.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut h = vec![0.0; bins];
    let width = (hi - lo) / bins as f64;
    for &x in samples {
        let k = if width > 0.0 { (((x - lo) / width) as usize).min(bins - 1) } else { 0 };
        h[k] += 1.0;
    }
    let n = samples.len() as f64;
    for v in &mut h {
        *v /= n;
    }
    Ok(h)
}

pub fn entropy_bits(hist: &[f64]) -> f64 {
    -hist.iter().filter(|&&p| p > 0.0).map(|p| p * p.log2()).sum::<f64>()
}

pub fn intensity_stats(samples: &[f64], bins: usize) -> Result<IntensityStats> {
    let histogram = histogram(samples, bins)?;
    let kurtosis = match kurtosis(samples) {
        Ok(k) => Some(k),
        Err(Error::Undefined(_)) => None,
        Err(e) => return Err(e),
    };
    Ok(IntensityStats {
        kurtosis,
        entropy: entropy_bits(&histogram),
        histogram,
    })
}
