//! Box-counting fractal dimension.

use serde::{Deserialize, Serialize};

use crate::error::{data_err, Error, Result};

pub const DEFAULT_SCALES: [usize; 5] = [1, 2, 4, 8, 16];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FractalResult {
    pub dimension: f64,
    pub scales: Vec<usize>,
    pub counts: Vec<usize>,
    pub fit_r2: f64,
}

/// Counts occupied `s×s×s` boxes on a grid anchored at the bounding-box corner
/// and fits `log N(s)` against `log(1/s)` by least squares.
pub fn box_count_dimension(mask: &[bool], dims: [usize; 3], scales: &[usize]) -> Result<FractalResult> {
    let n: usize = dims.iter().product();
    if mask.len() != n {
        return Err(data_err(format!("mask has {} voxels, grid {dims:?} has {n}", mask.len())));
    }
    if scales.len() < 3 {
        return Err(Error::Config(format!("box counting needs ≥3 scales, got {}", scales.len())));
    }
    if scales.contains(&0) {
        return Err(Error::Config("box sizes must be ≥ 1".into()));
    }
    let [_, ny, nz] = dims;
    let pts: Vec<[usize; 3]> = mask
        .iter()
        .enumerate()
        .filter(|(_, &v)| v)
        .map(|(i, _)| [i / (ny * nz), (i / nz) % ny, i % nz])
        .collect();
    if pts.is_empty() {
        return Err(Error::EmptyRegion("box counting of an empty region".into()));
    }
    let mut lo = pts[0];
    for p in &pts {
        for k in 0..3 {
            lo[k] = lo[k].min(p[k]);
        }
    }
    let mut counts = Vec::with_capacity(scales.len());
    let mut keys: Vec<[usize; 3]> = Vec::with_capacity(pts.len());
    for &s in scales {
        keys.clear();
        keys.extend(pts.iter().map(|p| [(p[0] - lo[0]) / s, (p[1] - lo[1]) / s, (p[2] - lo[2]) / s]));
        keys.sort_unstable();
        keys.dedup();
        counts.push(keys.len());
    }
    let xs: Vec<f64> = scales.iter().map(|&s| -(s as f64).ln()).collect();
    let ys: Vec<f64> = counts.iter().map(|&c| (c as f64).ln()).collect();
    let (slope, r2) = linear_fit(&xs, &ys);
    Ok(FractalResult {
        dimension: slope,
        scales: scales.to_vec(),
        counts,
        fit_r2: r2,
    })
}

/// Least-squares slope and coefficient of determination.
fn linear_fit(xs: &[f64], ys: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    if sxx == 0.0 {
        return (0.0, 0.0);
    }
    let slope = sxy / sxx;
    // all counts equal: a perfect flat fit
    let r2 = if syy == 0.0 { 1.0 } else { (sxy * sxy) / (sxx * syy) };
    (slope, r2)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cube_and_plane() {
        let d = [16, 16, 16];
        let r = box_count_dimension(&vec![true; 4096], d, &[1, 2, 4, 8]).unwrap();
        assert!((r.dimension - 3.0).abs() < 1e-12);
        assert_eq!(r.counts, vec![4096, 512, 64, 8]);
        let plane: Vec<bool> = (0..4096).map(|i| i % 16 == 5).collect();
        let r = box_count_dimension(&plane, d, &[1, 2, 4, 8]).unwrap();
        assert!((r.dimension - 2.0).abs() < 1e-12);
        assert!((r.fit_r2 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(box_count_dimension(&[true; 8], [2, 2, 2], &[1, 2]).is_err());
        assert!(matches!(box_count_dimension(&[false; 8], [2, 2, 2], &[1, 2, 4]), Err(Error::EmptyRegion(_))));
    }
}
