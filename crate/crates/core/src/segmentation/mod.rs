//! Tumor segmentation: label masks and regions, metrics, the FCN segmenter,
//! case-level cross-validation and the input-modality ablation.

pub mod mask;
pub mod metrics;
pub mod model;

use std::io::Write;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::case::Modality;
use crate::error::{data_err, Error, Result};
use crate::slices::PreparedCase;

pub use mask::{Region, SegmentationMask};
pub use metrics::{dice, hausdorff};
pub use model::{train_segmenter, FoldEnsemble, SegTrainConfig, Segmenter};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegionScore {
    pub dice: f64,
    /// 95th-percentile surface distance (mm); `None` when exactly one side is empty.
    pub hd95: Option<f64>,
    pub hd100: Option<f64>,
}

/// Scores for ET, WT and TC in that order.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegionScores {
    pub et: RegionScore,
    pub wt: RegionScore,
    pub tc: RegionScore,
}

impl RegionScores {
    pub fn get(&self, r: Region) -> Option<&RegionScore> {
        match r {
            Region::Et => Some(&self.et),
            Region::Wt => Some(&self.wt),
            Region::Tc => Some(&self.tc),
            Region::Ncr => None,
        }
    }
}

fn surface_distance(p: &[bool], t: &[bool], dims: [usize; 3], spacing: [f64; 3], pct: f64) -> Result<Option<f64>> {
    let (pe, te) = (!p.iter().any(|&v| v), !t.iter().any(|&v| v));
    match (pe, te) {
        (true, true) => Ok(Some(0.0)),
        (true, false) | (false, true) => Ok(None),
        _ => hausdorff(p, t, dims, spacing, pct).map(Some),
    }
}

/// Binarizes both masks per region and scores Dice and surface distances.
pub fn evaluate_regions(pred: &SegmentationMask, truth: &SegmentationMask) -> Result<RegionScores> {
    if pred.dims() != truth.dims() || pred.spacing() != truth.spacing() {
        return Err(data_err(format!(
            "prediction grid {:?} differs from reference {:?}",
            pred.dims(),
            truth.dims()
        )));
    }
    let score = |r: Region| -> Result<RegionScore> {
        let p = pred.region(r);
        let t = truth.region(r);
        Ok(RegionScore {
            dice: dice(&p, &t)?,
            hd95: surface_distance(&p, &t, pred.dims(), pred.spacing(), 95.0)?,
            hd100: surface_distance(&p, &t, pred.dims(), pred.spacing(), 100.0)?,
        })
    };
    Ok(RegionScores {
        et: score(Region::Et)?,
        wt: score(Region::Wt)?,
        tc: score(Region::Tc)?,
    })
}

/// Per-region mean over cases; distances average only their defined entries.
pub fn mean_scores(rows: &[RegionScores]) -> Result<RegionScores> {
    if rows.is_empty() {
        return Err(data_err("no scores to average"));
    }
    let avg = |f: &dyn Fn(&RegionScores) -> RegionScore| {
        let n = rows.len() as f64;
        let dice = rows.iter().map(|r| f(r).dice).sum::<f64>() / n;
        let mean_opt = |g: &dyn Fn(&RegionScore) -> Option<f64>| {
            let vals: Vec<f64> = rows.iter().filter_map(|r| g(&f(r))).collect();
            (!vals.is_empty()).then(|| vals.iter().sum::<f64>() / vals.len() as f64)
        };
        RegionScore {
            dice,
            hd95: mean_opt(&|s| s.hd95),
            hd100: mean_opt(&|s| s.hd100),
        }
    };
    Ok(RegionScores {
        et: avg(&|r| r.et),
        wt: avg(&|r| r.wt),
        tc: avg(&|r| r.tc),
    })
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.6}")).unwrap_or_else(|| "NA".into())
}

pub const METRICS_HEADER: [&str; 10] = [
    "model", "dice_et", "dice_wt", "dice_tc", "hd_et", "hd_wt", "hd_tc", "hd100_et", "hd100_wt", "hd100_tc",
];

/// Table rows `model, dice_et, dice_wt, dice_tc, hd_et, hd_wt, hd_tc` (95th
/// percentile), followed by the maximum-distance variants.
pub fn write_metrics_csv(rows: &[(String, RegionScores)], w: impl Write) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(METRICS_HEADER)?;
    for (name, s) in rows {
        wtr.write_record([
            name.clone(),
            format!("{:.6}", s.et.dice),
            format!("{:.6}", s.wt.dice),
            format!("{:.6}", s.tc.dice),
            fmt_opt(s.et.hd95),
            fmt_opt(s.wt.hd95),
            fmt_opt(s.tc.hd95),
            fmt_opt(s.et.hd100),
            fmt_opt(s.wt.hd100),
            fmt_opt(s.tc.hd100),
        ])?;
    }
    wtr.flush()?;
    Ok(())
}

/// Case-level k-fold split: `folds[i]` holds the validation case indices of fold `i`.
pub fn case_folds(n_cases: usize, k: usize, seed: u64) -> Result<Vec<Vec<usize>>> {
    if k < 2 {
        return Err(Error::Config(format!("cross-validation needs k ≥ 2, got {k}")));
    }
    if n_cases < k {
        return Err(data_err(format!("{n_cases} cases cannot fill {k} folds")));
    }
    let mut order: Vec<usize> = (0..n_cases).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut folds = vec![Vec::new(); k];
    for (i, c) in order.into_iter().enumerate() {
        folds[i % k].push(c);
    }
    for f in &mut folds {
        f.sort_unstable();
    }
    Ok(folds)
}

#[derive(Clone, Debug)]
pub struct CrossValidation {
    pub ensemble: FoldEnsemble,
    pub folds: Vec<Vec<usize>>,
    /// Mean validation scores per fold.
    pub fold_scores: Vec<RegionScores>,
    /// Training loss per step, per fold.
    pub losses: Vec<Vec<f64>>,
}

pub fn cross_validate_segmentation(
    cases: &[PreparedCase],
    modalities: &[Modality],
    k: usize,
    cfg: &SegTrainConfig,
) -> Result<CrossValidation> {
    let folds = case_folds(cases.len(), k, cfg.seed)?;
    let mut members = Vec::with_capacity(k);
    let mut fold_scores = Vec::with_capacity(k);
    let mut losses = Vec::with_capacity(k);
    for (i, val) in folds.iter().enumerate() {
        let train: Vec<PreparedCase> = (0..cases.len()).filter(|c| !val.contains(c)).map(|c| cases[c].clone()).collect();
        let fold_cfg = SegTrainConfig {
            seed: cfg.seed.wrapping_add(i as u64 + 1),
            ..cfg.clone()
        };
        let run = train_segmenter(&train, modalities, &fold_cfg)?;
        let model = run.model;
        losses.push(run.losses);
        let rows = val
            .iter()
            .map(|&c| score_case(&model, &cases[c]))
            .collect::<Result<Vec<_>>>()?;
        fold_scores.push(mean_scores(&rows)?);
        members.push(model);
    }
    Ok(CrossValidation {
        ensemble: FoldEnsemble::new(members)?,
        folds,
        fold_scores,
        losses,
    })
}

pub fn reference_mask(case: &PreparedCase) -> Result<SegmentationMask> {
    let classes = case.classes.as_ref().ok_or_else(|| data_err(format!("case {} has no reference mask", case.id)))?;
    let labels = classes.iter().map(|&c| mask::CLASS_LABELS[usize::from(c)]).collect();
    SegmentationMask::new(crate::volume::Volume::new(case.dims, case.spacing, [0.0; 3], labels)?)
}

pub fn score_case(model: &Segmenter, case: &PreparedCase) -> Result<RegionScores> {
    evaluate_regions(&model.predict_mask(case)?, &reference_mask(case)?)
}

pub fn score_ensemble(ens: &FoldEnsemble, cases: &[PreparedCase]) -> Result<RegionScores> {
    let rows = cases
        .iter()
        .map(|c| evaluate_regions(&ens.predict_mask(c)?, &reference_mask(c)?))
        .collect::<Result<Vec<_>>>()?;
    mean_scores(&rows)
}

/// Trains one segmenter per modality subset under the same budget and seed and
/// scores each on `test`.
pub fn modality_ablation(
    train: &[PreparedCase],
    test: &[PreparedCase],
    subsets: &[Vec<Modality>],
    cfg: &SegTrainConfig,
) -> Result<Vec<(Vec<Modality>, RegionScores)>> {
    subsets
        .iter()
        .map(|s| {
            if s.is_empty() {
                return Err(Error::Config("modality subset must not be empty".into()));
            }
            let model = train_segmenter(train, s, cfg)?.model;
            let rows = test.iter().map(|c| score_case(&model, c)).collect::<Result<Vec<_>>>()?;
            Ok((Modality::canonical(s), mean_scores(&rows)?))
        })
        .collect()
}

pub fn subset_name(s: &[Modality]) -> String {
    s.iter().map(|m| m.name()).collect::<Vec<_>>().join("+")
}

pub use model::probs_to_mask;

