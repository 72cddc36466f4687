//! Brute-force reference computations shared by the integration tests and the
//! acceptance runner.
#![allow(dead_code)]

use rand::Rng;

pub fn idx(dims: [usize; 3], x: usize, y: usize, z: usize) -> usize {
    (x * dims[1] + y) * dims[2] + z
}

pub fn coords(dims: [usize; 3], i: usize) -> [usize; 3] {
    [i / (dims[1] * dims[2]), (i / dims[2]) % dims[1], i % dims[2]]
}

pub fn random_mask(rng: &mut impl Rng, dims: [usize; 3], density: f64) -> Vec<bool> {
    (0..dims.iter().product::<usize>()).map(|_| rng.random::<f64>() < density).collect()
}

pub fn brute_dice(a: &[bool], b: &[bool]) -> f64 {
    let na = a.iter().filter(|&&v| v).count();
    let nb = b.iter().filter(|&&v| v).count();
    let both = a.iter().zip(b).filter(|(&p, &q)| p && q).count();
    if na + nb == 0 {
        1.0
    } else {
        2.0 * both as f64 / (na + nb) as f64
    }
}

/// Voxels of the set with a 6-neighbour outside it or on the grid border.
pub fn brute_surface(m: &[bool], dims: [usize; 3]) -> Vec<[usize; 3]> {
    let mut out = Vec::new();
    for i in 0..m.len() {
        if !m[i] {
            continue;
        }
        let c = coords(dims, i);
        let mut boundary = false;
        for axis in 0..3 {
            for step in [-1i64, 1] {
                let v = c[axis] as i64 + step;
                if v < 0 || v >= dims[axis] as i64 {
                    boundary = true;
                } else {
                    let mut n = c;
                    n[axis] = v as usize;
                    if !m[idx(dims, n[0], n[1], n[2])] {
                        boundary = true;
                    }
                }
            }
        }
        if boundary {
            out.push(c);
        }
    }
    out
}

fn pct(mut v: Vec<f64>, p: f64) -> f64 {
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    if v.len() == 1 {
        return v[0];
    }
    let pos = p / 100.0 * (v.len() - 1) as f64;
    let (lo, hi) = (pos.floor() as usize, pos.ceil() as usize);
    v[lo] + (v[hi] - v[lo]) * (pos - lo as f64)
}

/// All-pairs surface distances, larger of the two directed percentiles.
pub fn brute_hausdorff(a: &[bool], b: &[bool], dims: [usize; 3], spacing: [f64; 3], p: f64) -> f64 {
    let sa = brute_surface(a, dims);
    let sb = brute_surface(b, dims);
    let dist = |u: &[usize; 3], v: &[usize; 3]| {
        (0..3).map(|k| ((u[k] as f64 - v[k] as f64) * spacing[k]).powi(2)).sum::<f64>().sqrt()
    };
    let directed = |from: &[[usize; 3]], to: &[[usize; 3]]| -> Vec<f64> {
        from.iter().map(|u| to.iter().map(|v| dist(u, v)).fold(f64::INFINITY, f64::min)).collect()
    };
    pct(directed(&sa, &sb), p).max(pct(directed(&sb, &sa), p))
}

/// Depth-`depth` Menger sponge on a `3^depth` cube.
pub fn menger_sponge(depth: u32) -> (Vec<bool>, [usize; 3]) {
    let n = 3usize.pow(depth);
    let dims = [n; 3];
    let mut m = vec![false; n * n * n];
    for x in 0..n {
        for y in 0..n {
            for z in 0..n {
                let (mut a, mut b, mut c) = (x, y, z);
                let mut keep = true;
                for _ in 0..depth {
                    let ones = [a % 3, b % 3, c % 3].iter().filter(|&&d| d == 1).count();
                    if ones >= 2 {
                        keep = false;
                        break;
                    }
                    a /= 3;
                    b /= 3;
                    c /= 3;
                }
                m[idx(dims, x, y, z)] = keep;
            }
        }
    }
    (m, dims)
}

/// Occupied `s`-boxes on a grid anchored at the bounding-box corner, by
/// checking every box in the bounding box.
pub fn brute_box_count(m: &[bool], dims: [usize; 3], s: usize) -> usize {
    let pts: Vec<[usize; 3]> = (0..m.len()).filter(|&i| m[i]).map(|i| coords(dims, i)).collect();
    let lo: Vec<usize> = (0..3).map(|k| pts.iter().map(|p| p[k]).min().unwrap()).collect();
    let hi: Vec<usize> = (0..3).map(|k| pts.iter().map(|p| p[k]).max().unwrap()).collect();
    let nb: Vec<usize> = (0..3).map(|k| (hi[k] - lo[k]) / s + 1).collect();
    let mut count = 0;
    for bx in 0..nb[0] {
        for by in 0..nb[1] {
            for bz in 0..nb[2] {
                let occupied = pts.iter().any(|p| {
                    (p[0] - lo[0]) / s == bx && (p[1] - lo[1]) / s == by && (p[2] - lo[2]) / s == bz
                });
                count += usize::from(occupied);
            }
        }
    }
    count
}

/// Least-squares slope of `log N` against `log(1/s)`.
pub fn loglog_slope(scales: &[usize], counts: &[usize]) -> f64 {
    let xs: Vec<f64> = scales.iter().map(|&s| -(s as f64).ln()).collect();
    let ys: Vec<f64> = counts.iter().map(|&c| (c as f64).ln()).collect();
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    sxy / sxx
}

/// Population covariance of the set's voxel positions in mm, by direct sums.
pub fn brute_covariance(m: &[bool], dims: [usize; 3], spacing: [f64; 3]) -> [[f64; 3]; 3] {
    let pts: Vec<[f64; 3]> = (0..m.len())
        .filter(|&i| m[i])
        .map(|i| {
            let c = coords(dims, i);
            [c[0] as f64 * spacing[0], c[1] as f64 * spacing[1], c[2] as f64 * spacing[2]]
        })
        .collect();
    let n = pts.len() as f64;
    let mean: Vec<f64> = (0..3).map(|k| pts.iter().map(|p| p[k]).sum::<f64>() / n).collect();
    let mut c = [[0.0; 3]; 3];
    for a in 0..3 {
        for b in 0..3 {
            c[a][b] = pts.iter().map(|p| (p[a] - mean[a]) * (p[b] - mean[b])).sum::<f64>() / n;
        }
    }
    c
}

/// Trace, sum of principal 2×2 minors and determinant.
pub fn invariants(c: &[[f64; 3]; 3]) -> [f64; 3] {
    let tr = c[0][0] + c[1][1] + c[2][2];
    let m2 = c[0][0] * c[1][1] - c[0][1] * c[1][0] + c[0][0] * c[2][2] - c[0][2] * c[2][0] + c[1][1] * c[2][2]
        - c[1][2] * c[2][1];
    let det = c[0][0] * (c[1][1] * c[2][2] - c[1][2] * c[2][1]) - c[0][1] * (c[1][0] * c[2][2] - c[1][2] * c[2][0])
        + c[0][2] * (c[1][0] * c[2][1] - c[1][1] * c[2][0]);
    [tr, m2, det]
}

/// Solid axis-aligned ellipsoid centred in the grid, semi-axes in voxels.
pub fn ellipsoid(dims: [usize; 3], semi: [f64; 3]) -> Vec<bool> {
    let centre: Vec<f64> = dims.iter().map(|&d| (d as f64 - 1.0) / 2.0).collect();
    (0..dims.iter().product::<usize>())
        .map(|i| {
            let c = coords(dims, i);
            (0..3).map(|k| ((c[k] as f64 - centre[k]) / semi[k]).powi(2)).sum::<f64>() <= 1.0
        })
        .collect()
}

/// Random connected-ish blob: a union of small random boxes inside `dims`.
pub fn random_blob(rng: &mut impl Rng, dims: [usize; 3]) -> Vec<bool> {
    let mut m = vec![false; dims.iter().product()];
    for _ in 0..rng.random_range(1..5) {
        let lo: Vec<usize> = (0..3).map(|k| rng.random_range(0..dims[k])).collect();
        let hi: Vec<usize> = (0..3).map(|k| (lo[k] + rng.random_range(1..=4)).min(dims[k])).collect();
        for x in lo[0]..hi[0] {
            for y in lo[1]..hi[1] {
                for z in lo[2]..hi[2] {
                    m[idx(dims, x, y, z)] = true;
                }
            }
        }
    }
    m
}
