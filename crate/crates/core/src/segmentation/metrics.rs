//! Overlap and surface-distance metrics on boolean voxel sets.

use crate::error::{data_err, Error, Result};

/// `2|A∩B| / (|A|+|B|)`; two empty sets score 1.
pub fn dice(pred: &[bool], truth: &[bool]) -> Result<f64> {
    if pred.len() != truth.len() {
        return Err(data_err(format!("dice grid mismatch: {} vs {} voxels", pred.len(), truth.len())));
    }
    let (mut inter, mut a, mut b) = (0usize, 0usize, 0usize);
    for (&p, &t) in pred.iter().zip(truth) {
        a += usize::from(p);
        b += usize::from(t);
        inter += usize::from(p && t);
    }
    if a + b == 0 {
        return Ok(1.0);
    }
    Ok(2.0 * inter as f64 / (a + b) as f64)
}

/// Set voxels with at least one 6-neighbor outside the set; the grid
/// boundary counts as outside.
pub fn surface(mask: &[bool], dims: [usize; 3]) -> Vec<bool> {
    let [nx, ny, nz] = dims;
    let mut out = vec![false; mask.len()];
    for x in 0..nx {
        for y in 0..ny {
            for z in 0..nz {
                let i = (x * ny + y) * nz + z;
                if !mask[i] {
                    continue;
                }
                let edge = x == 0 || y == 0 || z == 0 || x + 1 == nx || y + 1 == ny || z + 1 == nz;
                out[i] = edge
                    || !mask[i - ny * nz]
                    || !mask[i + ny * nz]
                    || !mask[i - nz]
                    || !mask[i + nz]
                    || !mask[i - 1]
                    || !mask[i + 1];
            }
        }
    }
    out
}

/// One-dimensional squared distance transform along a line with sample spacing `h`
/// (lower envelope of parabolas).
fn edt_line(f: &[f64], h: f64, out: &mut [f64], v: &mut Vec<usize>, z: &mut Vec<f64>) {
    let n = f.len();
    v.clear();
    z.clear();
    for q in 0..n {
        if !f[q].is_finite() {
            continue;
        }
        let xq = h * q as f64;
        loop {
            match v.last() {
                None => {
                    v.push(q);
                    z.push(f64::NEG_INFINITY);
                    break;
                }
                Some(&p) => {
                    let xp = h * p as f64;
                    let s = ((f[q] + xq * xq) - (f[p] + xp * xp)) / (2.0 * (xq - xp));
                    if s <= *z.last().unwrap() {
                        v.pop();
                        z.pop();
                    } else {
                        v.push(q);
                        z.push(s);
                        break;
                    }
                }
            }
        }
    }
    if v.is_empty() {
        out.iter_mut().for_each(|o| *o = f64::INFINITY);
        return;
    }
    let mut k = 0;
    for (p, o) in out.iter_mut().enumerate() {
        let x = h * p as f64;
        while k + 1 < v.len() && z[k + 1] < x {
            k += 1;
        }
        let d = x - h * v[k] as f64;
        *o = d * d + f[v[k]];
    }
}

/// Exact squared Euclidean distance (mm²) from every voxel to the nearest set voxel;
/// infinite when the set is empty.
pub fn squared_edt(mask: &[bool], dims: [usize; 3], spacing: [f64; 3]) -> Vec<f64> {
    let mut d: Vec<f64> = mask.iter().map(|&m| if m { 0.0 } else { f64::INFINITY }).collect();
    let strides = [dims[1] * dims[2], dims[2], 1];
    let mut line = Vec::new();
    let mut out = Vec::new();
    let (mut v, mut z) = (Vec::new(), Vec::new());
    for axis in 0..3 {
        let n = dims[axis];
        let st = strides[axis];
        line.resize(n, 0.0);
        out.resize(n, 0.0);
        for start in 0..d.len() {
            // visit each line once, from the voxel whose coordinate on `axis` is 0
            let c = (start / st) % n;
            if c != 0 {
                continue;
            }
            for k in 0..n {
                line[k] = d[start + k * st];
            }
            edt_line(&line, spacing[axis], &mut out, &mut v, &mut z);
            for k in 0..n {
                d[start + k * st] = out[k];
            }
        }
    }
    d
}

/// Linear-interpolated percentile of unsorted values (`p` in [0, 100]).
pub fn percentile(values: &mut [f64], p: f64) -> f64 {
    values.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = values.len();
    if n == 1 {
        return values[0];
    }
    let pos = p / 100.0 * (n - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let t = pos - lo as f64;
    values[lo] + (values[hi] - values[lo]) * t
}

/// Distances (mm) from each surface voxel of `from` to the nearest surface voxel of `to`.
pub fn directed_surface_distances(from: &[bool], to: &[bool], dims: [usize; 3], spacing: [f64; 3]) -> Vec<f64> {
    let sf = surface(from, dims);
    let st = surface(to, dims);
    let dt = squared_edt(&st, dims, spacing);
    sf.iter().zip(&dt).filter(|(&s, _)| s).map(|(_, &d)| d.sqrt()).collect()
}

/// Symmetric surface Hausdorff distance at `percentile` (100 = classic maximum):
/// the larger of the two directed percentiles.
pub fn hausdorff(pred: &[bool], truth: &[bool], dims: [usize; 3], spacing: [f64; 3], pct: f64) -> Result<f64> {
    let n: usize = dims.iter().product();
    if pred.len() != n || truth.len() != n {
        return Err(data_err("hausdorff grid mismatch"));
    }
    if !(0.0..=100.0).contains(&pct) {
        return Err(Error::Config(format!("percentile {pct} outside [0, 100]")));
    }
    if !pred.iter().any(|&v| v) || !truth.iter().any(|&v| v) {
        return Err(Error::Undefined("hausdorff distance of an empty voxel set".into()));
    }
    let mut ab = directed_surface_distances(pred, truth, dims, spacing);
    let mut ba = directed_surface_distances(truth, pred, dims, spacing);
    Ok(percentile(&mut ab, pct).max(percentile(&mut ba, pct)))
}
