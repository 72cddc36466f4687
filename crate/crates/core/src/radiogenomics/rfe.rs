//! Recursive feature elimination ranked by linear-SVR weights.

use serde::{Deserialize, Serialize};

use crate::error::{data_err, Error, Result};
use crate::radiogenomics::fusion::Standardizer;
use crate::radiogenomics::svm::{Kernel, SvmParams, Svr};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RfeConfig {
    /// Fraction of the remaining columns dropped per round (at least one).
    pub step_fraction: f64,
    pub svm: SvmParams,
}

impl Default for RfeConfig {
    fn default() -> Self {
        Self {
            step_fraction: 0.1,
            svm: SvmParams {
                kernel: Kernel::Linear,
                ..SvmParams::default()
            },
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RfeResult {
    /// Kept column indices, ascending.
    pub selected: Vec<usize>,
    pub selected_names: Vec<String>,
    /// Eliminated column indices, first dropped first.
    pub eliminated: Vec<usize>,
    pub target: usize,
}

/// Repeatedly fits a linear SVR on the remaining standardized columns and drops
/// the smallest-|weight| share until `target` columns remain. Ties break by
/// column name so the selection does not depend on column order.
pub fn rfe_select(rows: &[Vec<f64>], names: &[String], y: &[f64], target: usize, cfg: &RfeConfig) -> Result<RfeResult> {
    let d = names.len();
    if target == 0 || target > d {
        return Err(Error::Config(format!("RFE target {target} outside 1..={d}")));
    }
    if !(cfg.step_fraction > 0.0 && cfg.step_fraction < 1.0) {
        return Err(Error::Config(format!("step_fraction must be in (0, 1), got {}", cfg.step_fraction)));
    }
    if rows.is_empty() || rows.len() != y.len() || rows.iter().any(|r| r.len() != d) {
        return Err(data_err("RFE needs nonempty rows matching names and targets"));
    }
    let x = Standardizer::fit(rows)?.transform(rows);
    let ys = standardize_target(y);
    let linear = SvmParams {
        kernel: Kernel::Linear,
        ..cfg.svm
    };
    let mut remaining: Vec<usize> = (0..d).collect();
    let mut eliminated = Vec::new();
    while remaining.len() > target {
        let sub: Vec<Vec<f64>> = x.iter().map(|r| remaining.iter().map(|&c| r[c]).collect()).collect();
        let w = Svr::fit(&sub, &ys, &linear)?.linear_weights().expect("linear kernel");
        let drop = ((remaining.len() as f64 * cfg.step_fraction).floor() as usize)
            .max(1)
            .min(remaining.len() - target);
        let mut order: Vec<usize> = (0..remaining.len()).collect();
        order.sort_by(|&a, &b| {
            w[a].abs()
                .total_cmp(&w[b].abs())
                .then_with(|| names[remaining[a]].cmp(&names[remaining[b]]))
        });
        let mut gone: Vec<usize> = order[..drop].to_vec();
        eliminated.extend(gone.iter().map(|&k| remaining[k]));
        gone.sort_unstable_by(|a, b| b.cmp(a));
        for k in gone {
            remaining.remove(k);
        }
    }
    Ok(RfeResult {
        selected_names: remaining.iter().map(|&c| names[c].clone()).collect(),
        selected: remaining,
        eliminated,
        target,
    })
}

pub(crate) fn standardize_target(y: &[f64]) -> Vec<f64> {
    let n = y.len() as f64;
    let m = y.iter().sum::<f64>() / n;
    let s = (y.iter().map(|v| (v - m).powi(2)).sum::<f64>() / n).sqrt();
    let s = if s > 0.0 { s } else { 1.0 };
    y.iter().map(|v| (v - m) / s).collect()
}
