//! Principal-axis geometry of a voxel region.

use nalgebra::{Matrix3, SymmetricEigen, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{data_err, Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegionGeometry {
    /// Mean voxel position in mm (index × spacing).
    pub centroid: [f64; 3],
    /// `4·sqrt(λ)` per principal axis, longest first.
    pub axis_lengths: [f64; 3],
    /// Unit principal directions, rows matching `axis_lengths`.
    pub axis_directions: [[f64; 3]; 3],
    /// Population covariance eigenvalues, descending.
    pub eigenvalues: [f64; 3],
    pub meridional_eccentricity: f64,
    pub equatorial_eccentricity: f64,
}

/// `(meridional, equatorial)` for sorted axis lengths `a ≥ b ≥ c ≥ 0`, with the
/// shortest axis as the polar axis.
///
/// `a = 0` (a point) gives `(0, 0)`. A flat region (`c = 0`) gives 1 for both,
/// and so does the equatorial value of a line (`b = 0`).
pub fn eccentricities(a: f64, b: f64, c: f64) -> Result<(f64, f64)> {
    if !(a >= b && b >= c && c >= 0.0) || !a.is_finite() {
        return Err(data_err(format!("axis lengths must satisfy a ≥ b ≥ c ≥ 0, got ({a}, {b}, {c})")));
    }
    if a == 0.0 {
        return Ok((0.0, 0.0));
    }
    let ecc = |long: f64, short: f64| if long == 0.0 { 1.0 } else { (1.0 - (short / long).powi(2)).max(0.0).sqrt() };
    Ok((ecc(a, c), ecc(b, c)))
}

pub(crate) fn voxel_coords(mask: &[bool], dims: [usize; 3], spacing: [f64; 3]) -> Result<Vec<[f64; 3]>> {
    let n: usize = dims.iter().product();
    if mask.len() != n {
        return Err(data_err(format!("mask has {} voxels, grid {dims:?} has {n}", mask.len())));
    }
    let [_, ny, nz] = dims;
    Ok(mask
        .iter()
        .enumerate()
        .filter(|(_, &v)| v)
        .map(|(i, _)| {
            let (x, y, z) = (i / (ny * nz), (i / nz) % ny, i % nz);
            [x as f64 * spacing[0], y as f64 * spacing[1], z as f64 * spacing[2]]
        })
        .collect())
}

pub fn region_geometry(mask: &[bool], dims: [usize; 3], spacing: [f64; 3]) -> Result<RegionGeometry> {
    let pts = voxel_coords(mask, dims, spacing)?;
    if pts.is_empty() {
        return Err(Error::EmptyRegion("geometry of an empty region".into()));
    }
    let n = pts.len() as f64;
    let mut mean = Vector3::zeros();
    for p in &pts {
        mean += Vector3::from(*p);
    }
    mean /= n;
    let mut cov = Matrix3::zeros();
    for p in &pts {
        let d = Vector3::from(*p) - mean;
        cov += d * d.transpose();
    }
    cov /= n;
    let eig = SymmetricEigen::new(cov);
    let mut order = [0usize, 1, 2];
    order.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]));
    let mut eigenvalues = [0.0; 3];
    let mut axis_directions = [[0.0; 3]; 3];
    for (k, &i) in order.iter().enumerate() {
        eigenvalues[k] = eig.eigenvalues[i].max(0.0);
        let mut v: Vector3<f64> = eig.eigenvectors.column(i).into_owned();
        v /= v.norm();
        let lead = (0..3).max_by(|&a, &b| v[a].abs().total_cmp(&v[b].abs())).unwrap();
        if v[lead] < 0.0 {
            v = -v;
        }
        axis_directions[k] = [v[0], v[1], v[2]];
    }
    let axis_lengths = eigenvalues.map(|l| 4.0 * l.sqrt());
    let (meridional_eccentricity, equatorial_eccentricity) = eccentricities(axis_lengths[0], axis_lengths[1], axis_lengths[2])?;
    Ok(RegionGeometry {
        centroid: [mean[0], mean[1], mean[2]],
        axis_lengths,
        axis_directions,
        eigenvalues,
        meridional_eccentricity,
        equatorial_eccentricity,
    })
}
