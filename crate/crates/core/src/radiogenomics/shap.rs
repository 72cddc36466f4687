//! Interventional Shapley values: exact coalition enumeration for small models,
//! permutation sampling otherwise, and the mean-|φ| ranking.

use std::io::Write;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{data_err, Error, Result};
use crate::radiogenomics::fusion::ColumnSource;

pub const EXACT_MAX_FEATURES: usize = 15;
pub const DEFAULT_PERMUTATIONS: usize = 2048;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShapValues {
    /// Mean model output over the background.
    pub base: f64,
    pub phi: Vec<f64>,
    pub exact: bool,
}

fn check(x: &[f64], background: &[Vec<f64>]) -> Result<()> {
    if background.is_empty() {
        return Err(data_err("SHAP background is empty"));
    }
    if background.iter().any(|b| b.len() != x.len()) {
        return Err(data_err("background rows differ in width from the instance"));
    }
    Ok(())
}

fn base_value(f: &dyn Fn(&[f64]) -> f64, background: &[Vec<f64>]) -> f64 {
    background.iter().map(|b| f(b)).sum::<f64>() / background.len() as f64
}

/// `v(S)` = mean over the background of `f` with features in `S` taken from `x`.
/// Enumerates all `2^M` coalitions.
pub fn shap_exact(f: &dyn Fn(&[f64]) -> f64, x: &[f64], background: &[Vec<f64>]) -> Result<ShapValues> {
    check(x, background)?;
    let m = x.len();
    if m > EXACT_MAX_FEATURES {
        return Err(Error::Config(format!("exact SHAP is limited to {EXACT_MAX_FEATURES} features, got {m}")));
    }
    let full = 1usize << m;
    let mut v = vec![0.0; full];
    let mut z = vec![0.0; m];
    for (mask, vs) in v.iter_mut().enumerate() {
        let mut acc = 0.0;
        for b in background {
            for k in 0..m {
                z[k] = if mask >> k & 1 == 1 { x[k] } else { b[k] };
            }
            acc += f(&z);
        }
        *vs = acc / background.len() as f64;
    }
    // weight(|S|) = |S|!(M−|S|−1)!/M!
    let mut fact = vec![1.0_f64; m + 1];
    for k in 1..=m {
        fact[k] = fact[k - 1] * k as f64;
    }
    let weight: Vec<f64> = (0..m).map(|s| fact[s] * fact[m - s - 1] / fact[m]).collect();
    let mut phi = vec![0.0; m];
    for mask in 0..full {
        let size = mask.count_ones() as usize;
        for (i, p) in phi.iter_mut().enumerate() {
            if mask >> i & 1 == 0 {
                *p += weight[size] * (v[mask | 1 << i] - v[mask]);
            }
        }
    }
    Ok(ShapValues {
        base: v[0],
        phi,
        exact: true,
    })
}

/// Each sample draws a feature order and one background row, then credits each
/// feature with the output change as it switches from the background to `x`.
pub fn shap_sampled(f: &dyn Fn(&[f64]) -> f64, x: &[f64], background: &[Vec<f64>], permutations: usize, seed: u64) -> Result<ShapValues> {
    check(x, background)?;
    if permutations == 0 {
        return Err(Error::Config("permutation budget must be positive".into()));
    }
    let m = x.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut order: Vec<usize> = (0..m).collect();
    let mut phi = vec![0.0; m];
    for _ in 0..permutations {
        order.shuffle(&mut rng);
        let b = &background[rng.random_range(0..background.len())];
        let mut z = b.clone();
        let mut prev = f(&z);
        for &k in &order {
            z[k] = x[k];
            let cur = f(&z);
            phi[k] += cur - prev;
            prev = cur;
        }
    }
    for p in &mut phi {
        *p /= permutations as f64;
    }
    Ok(ShapValues {
        base: base_value(f, background),
        phi,
        exact: false,
    })
}

/// Exact up to [`EXACT_MAX_FEATURES`] features, sampled beyond.
pub fn shap_attribution(f: &dyn Fn(&[f64]) -> f64, x: &[f64], background: &[Vec<f64>], permutations: usize, seed: u64) -> Result<ShapValues> {
    if x.len() <= EXACT_MAX_FEATURES {
        shap_exact(f, x, background)
    } else {
        shap_sampled(f, x, background, permutations, seed)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShapRank {
    pub feature: String,
    pub mean_abs_shap: f64,
    pub source: ColumnSource,
}

/// Features by descending mean |φ| over cases; equal means order by name.
pub fn rank_features_by_shap(names: &[String], sources: &[ColumnSource], attributions: &[Vec<f64>]) -> Result<Vec<ShapRank>> {
    if attributions.is_empty() {
        return Err(data_err("no attributions to rank"));
    }
    if names.len() != sources.len() || attributions.iter().any(|a| a.len() != names.len()) {
        return Err(data_err("attribution width differs from the feature list"));
    }
    let n = attributions.len() as f64;
    let mut out: Vec<ShapRank> = names
        .iter()
        .enumerate()
        .map(|(k, name)| ShapRank {
            feature: name.clone(),
            mean_abs_shap: attributions.iter().map(|a| a[k].abs()).sum::<f64>() / n,
            source: sources[k],
        })
        .collect();
    out.sort_by(|a, b| b.mean_abs_shap.total_cmp(&a.mean_abs_shap).then_with(|| a.feature.cmp(&b.feature)));
    Ok(out)
}

pub fn write_shap_csv(ranks: &[ShapRank], top_k: Option<usize>, w: impl Write) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(["feature", "mean_abs_shap", "provenance"])?;
    for r in ranks.iter().take(top_k.unwrap_or(usize::MAX)) {
        wtr.write_record([r.feature.clone(), format!("{:.9}", r.mean_abs_shap), r.source.name().to_string()])?;
    }
    wtr.flush()?;
    Ok(())
}
