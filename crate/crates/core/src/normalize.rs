use crate::error::{data_err, Result};
use crate::volume::Volume;

pub const CLIP: f64 = 5.0;

#[derive(Clone, Debug)]
pub struct Normalized {
    pub volume: Volume<f32>,
    /// Set when the support had zero variance and every support voxel was mapped to 0.5.
    pub warning: Option<String>,
}

/// Nonzero voxels.
pub fn nonzero_support(vol: &Volume<f32>) -> Vec<bool> {
    vol.data().iter().map(|&v| v != 0.0).collect()
}

/// Z-scores the support voxels, clips to ±5 and rescales to [0, 1].
/// Voxels outside the support are set to 0.
pub fn normalize_intensity(vol: &Volume<f32>, support: &[bool]) -> Result<Normalized> {
    if support.len() != vol.len() {
        return Err(data_err("support mask size differs from volume"));
    }
    let vals: Vec<f64> = vol
        .data()
        .iter()
        .zip(support)
        .filter(|(_, &s)| s)
        .map(|(&v, _)| f64::from(v))
        .collect();
    if vals.is_empty() {
        return Err(data_err("normalization support is empty"));
    }
    let n = vals.len() as f64;
    let mean = vals.iter().sum::<f64>() / n;
    let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    let sd = var.sqrt();
    let degenerate = !(sd > 0.0);
    let mut out = vol.clone();
    for (o, (&v, &s)) in out.data_mut().iter_mut().zip(vol.data().iter().zip(support)) {
        *o = if !s {
            0.0
        } else if degenerate {
            0.5
        } else {
            let z = ((f64::from(v) - mean) / sd).clamp(-CLIP, CLIP);
            ((z + CLIP) / (2.0 * CLIP)) as f32
        };
    }
    Ok(Normalized {
        volume: out,
        warning: degenerate.then(|| format!("constant support ({mean}); mapped to 0.5")),
    })
}
