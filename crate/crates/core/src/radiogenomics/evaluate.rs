//! Survival models on fused features and their k-fold evaluation.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{data_err, Error, Result};
use crate::radiogenomics::ann::{Ann, AnnConfig};
use crate::radiogenomics::fusion::{FusedFeatureSet, Standardizer};
use crate::radiogenomics::rfe::{rfe_select, RfeConfig};
use crate::radiogenomics::survival::{SurvivalClass, SurvivalRecord, Thresholds};
use crate::radiogenomics::svm::{SvmParams, Svc, Svr};
use crate::segmentation::case_folds;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SurvivalModelKind {
    /// RBF ε-SVR on days; classes by thresholding the prediction.
    Svr,
    /// RBF one-vs-one C-SVC on the classes directly; no day estimate.
    Svc,
    /// Six-unit ReLU network on days; classes by thresholding.
    Ann,
}

impl SurvivalModelKind {
    pub fn name(self) -> &'static str {
        match self {
            SurvivalModelKind::Svr => "svr",
            SurvivalModelKind::Svc => "svc",
            SurvivalModelKind::Ann => "ann",
        }
    }
}

impl std::str::FromStr for SurvivalModelKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "svr" => Ok(SurvivalModelKind::Svr),
            "svc" => Ok(SurvivalModelKind::Svc),
            "ann" => Ok(SurvivalModelKind::Ann),
            _ => Err(Error::Config(format!("unknown survival model `{s}` (svr, svc, ann)"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SurvivalConfig {
    pub model: SurvivalModelKind,
    pub svm: SvmParams,
    pub ann: AnnConfig,
    /// Columns kept by RFE inside each training split; `None` keeps all.
    pub rfe_target: Option<usize>,
    pub rfe: RfeConfig,
    pub folds: usize,
    pub seed: u64,
    pub thresholds: Thresholds,
}

impl Default for SurvivalConfig {
    fn default() -> Self {
        Self {
            model: SurvivalModelKind::Svr,
            svm: SvmParams::default(),
            ann: AnnConfig::default(),
            rfe_target: None,
            rfe: RfeConfig::default(),
            folds: 4,
            seed: 0,
            thresholds: Thresholds::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
enum Fitted {
    Svr(Svr),
    Svc(Svc),
    Ann(Ann),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SurvivalModel {
    pub kind: SurvivalModelKind,
    /// Input columns used, in order.
    pub selected: Vec<usize>,
    standardizer: Standardizer,
    y_mean: f64,
    y_std: f64,
    thresholds: Thresholds,
    fitted: Fitted,
}

impl SurvivalModel {
    fn project(&self, row: &[f64]) -> Vec<f64> {
        self.selected.iter().map(|&c| row[c]).collect()
    }

    /// Model output for the selected columns in raw units: days, or the class
    /// index for the classifier.
    pub fn predict_selected(&self, z: &[f64]) -> f64 {
        let s = self.standardizer.transform_row(z);
        match &self.fitted {
            Fitted::Svr(m) => m.predict(&s) * self.y_std + self.y_mean,
            Fitted::Ann(m) => m.predict(&s) * self.y_std + self.y_mean,
            Fitted::Svc(m) => m.predict(&s) as f64,
        }
    }

    pub fn predict_days(&self, row: &[f64]) -> Option<f64> {
        match self.fitted {
            Fitted::Svc(_) => None,
            _ => Some(self.predict_selected(&self.project(row))),
        }
    }

    pub fn predict_class(&self, row: &[f64]) -> SurvivalClass {
        match &self.fitted {
            Fitted::Svc(m) => SurvivalClass::from_index(m.predict(&self.standardizer.transform_row(&self.project(row)))),
            _ => self.thresholds.band(self.predict_selected(&self.project(row))),
        }
    }
}

fn targets(set: &FusedFeatureSet, records: &[SurvivalRecord]) -> Result<Vec<SurvivalRecord>> {
    set.case_ids
        .iter()
        .map(|id| {
            records
                .iter()
                .find(|r| &r.id == id)
                .cloned()
                .ok_or_else(|| data_err(format!("case {id} has no survival record")))
        })
        .collect()
}

/// Fits on raw feature rows; standardization, RFE and target scaling all use
/// these rows only.
pub fn train_survival_model(rows: &[Vec<f64>], names: &[String], records: &[SurvivalRecord], cfg: &SurvivalConfig) -> Result<SurvivalModel> {
    cfg.thresholds.validate()?;
    if rows.is_empty() || rows.len() != records.len() {
        return Err(data_err(format!("{} feature rows for {} survival records", rows.len(), records.len())));
    }
    let days: Vec<f64> = records.iter().map(|r| f64::from(r.days)).collect();
    let selected = match cfg.rfe_target {
        Some(t) if t < names.len() => rfe_select(rows, names, &days, t, &cfg.rfe)?.selected,
        Some(t) if t > names.len() => return Err(Error::Config(format!("RFE target {t} exceeds {} columns", names.len()))),
        _ => (0..names.len()).collect(),
    };
    let sub: Vec<Vec<f64>> = rows.iter().map(|r| selected.iter().map(|&c| r[c]).collect()).collect();
    let standardizer = Standardizer::fit(&sub)?;
    let x = standardizer.transform(&sub);
    let n = days.len() as f64;
    let y_mean = days.iter().sum::<f64>() / n;
    let sd = (days.iter().map(|d| (d - y_mean).powi(2)).sum::<f64>() / n).sqrt();
    let y_std = if sd > 0.0 { sd } else { 1.0 };
    let ys: Vec<f64> = days.iter().map(|d| (d - y_mean) / y_std).collect();
    let fitted = match cfg.model {
        SurvivalModelKind::Svr => Fitted::Svr(Svr::fit(&x, &ys, &cfg.svm)?),
        SurvivalModelKind::Svc => {
            let labels: Vec<usize> = records.iter().map(|r| r.class.index()).collect();
            Fitted::Svc(Svc::fit(&x, &labels, &cfg.svm)?)
        }
        SurvivalModelKind::Ann => Fitted::Ann(Ann::fit(&x, &ys, &cfg.ann)?),
    };
    Ok(SurvivalModel {
        kind: cfg.model,
        selected,
        standardizer,
        y_mean,
        y_std,
        thresholds: cfg.thresholds,
        fitted,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FoldMetrics {
    /// MSE in days²; `None` for the classifier.
    pub mse: Option<f64>,
    pub accuracy: f64,
    /// Per class (short, medium, long); `None` when the fold has no positives.
    pub sensitivity: [Option<f64>; 3],
    /// Per class; `None` when the fold has no negatives.
    pub specificity: [Option<f64>; 3],
    /// `confusion[true][predicted]`.
    pub confusion: [[usize; 3]; 3],
}

/// Metrics from true/predicted classes and optional day estimates.
pub fn fold_metrics(truth: &[SurvivalClass], pred: &[SurvivalClass], days: Option<(&[f64], &[f64])>) -> Result<FoldMetrics> {
    if truth.is_empty() || truth.len() != pred.len() {
        return Err(data_err("fold metrics need equal nonempty label lists"));
    }
    let mut confusion = [[0usize; 3]; 3];
    for (t, p) in truth.iter().zip(pred) {
        confusion[t.index()][p.index()] += 1;
    }
    let n = truth.len();
    let correct: usize = (0..3).map(|k| confusion[k][k]).sum();
    let mut sensitivity = [None; 3];
    let mut specificity = [None; 3];
    for k in 0..3 {
        let pos: usize = confusion[k].iter().sum();
        let tp = confusion[k][k];
        let fp: usize = (0..3).filter(|&t| t != k).map(|t| confusion[t][k]).sum();
        let neg = n - pos;
        sensitivity[k] = (pos > 0).then(|| tp as f64 / pos as f64);
        specificity[k] = (neg > 0).then(|| (neg - fp) as f64 / neg as f64);
    }
    let mse = match days {
        Some((t, p)) => {
            if t.len() != n || p.len() != n {
                return Err(data_err("day estimates do not match labels"));
            }
            Some(t.iter().zip(p).map(|(a, b)| (a - b).powi(2)).sum::<f64>() / n as f64)
        }
        None => None,
    };
    Ok(FoldMetrics {
        mse,
        accuracy: correct as f64 / n as f64,
        sensitivity,
        specificity,
        confusion,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SurvivalEvaluation {
    pub model: SurvivalModelKind,
    pub folds: Vec<Vec<usize>>,
    pub fold_metrics: Vec<FoldMetrics>,
}

fn mean_defined(vals: impl Iterator<Item = Option<f64>>) -> Option<f64> {
    let v: Vec<f64> = vals.flatten().collect();
    (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
}

impl SurvivalEvaluation {
    /// Arithmetic mean of the fold rows; undefined entries are skipped.
    pub fn average(&self) -> FoldMetrics {
        let f = &self.fold_metrics;
        let mut confusion = [[0usize; 3]; 3];
        for m in f {
            for (a, b) in confusion.iter_mut().flatten().zip(m.confusion.iter().flatten()) {
                *a += b;
            }
        }
        FoldMetrics {
            mse: mean_defined(f.iter().map(|m| m.mse)),
            accuracy: f.iter().map(|m| m.accuracy).sum::<f64>() / f.len() as f64,
            sensitivity: std::array::from_fn(|k| mean_defined(f.iter().map(|m| m.sensitivity[k]))),
            specificity: std::array::from_fn(|k| mean_defined(f.iter().map(|m| m.specificity[k]))),
            confusion,
        }
    }

    pub fn mean_mse(&self) -> Option<f64> {
        self.average().mse
    }

    pub fn write_csv(&self, w: impl Write) -> Result<()> {
        write_survival_metrics(&[self], w)
    }
}

pub const SURVIVAL_METRICS_HEADER: [&str; 10] =
    ["model", "fold", "mse", "accuracy", "sens_short", "sens_medium", "sens_long", "spec_short", "spec_medium", "spec_long"];

fn opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.6}")).unwrap_or_else(|| "NA".into())
}

/// One row per fold and an `average` row per evaluation.
pub fn write_survival_metrics(evals: &[&SurvivalEvaluation], w: impl Write) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(SURVIVAL_METRICS_HEADER)?;
    for e in evals {
        let rows = e
            .fold_metrics
            .iter()
            .enumerate()
            .map(|(i, m)| ((i + 1).to_string(), m.clone()))
            .chain(std::iter::once(("average".to_string(), e.average())));
        for (fold, m) in rows {
            let mut rec = vec![e.model.name().to_string(), fold, opt(m.mse), format!("{:.6}", m.accuracy)];
            rec.extend(m.sensitivity.iter().map(|v| opt(*v)));
            rec.extend(m.specificity.iter().map(|v| opt(*v)));
            wtr.write_record(&rec)?;
        }
    }
    wtr.flush()?;
    Ok(())
}

/// Case-disjoint k-fold evaluation; every fitting step sees the training split only.
pub fn evaluate_survival(set: &FusedFeatureSet, records: &[SurvivalRecord], cfg: &SurvivalConfig) -> Result<SurvivalEvaluation> {
    let recs = targets(set, records)?;
    let folds = case_folds(set.n_cases(), cfg.folds, cfg.seed)?;
    let mut metrics = Vec::with_capacity(folds.len());
    for (i, val) in folds.iter().enumerate() {
        let train: Vec<usize> = (0..set.n_cases()).filter(|c| !val.contains(c)).collect();
        let rows: Vec<Vec<f64>> = train.iter().map(|&c| set.rows[c].clone()).collect();
        let tr_recs: Vec<SurvivalRecord> = train.iter().map(|&c| recs[c].clone()).collect();
        let fold_cfg = SurvivalConfig {
            ann: AnnConfig {
                seed: cfg.ann.seed.wrapping_add(i as u64),
                ..cfg.ann.clone()
            },
            ..cfg.clone()
        };
        let model = train_survival_model(&rows, &set.names, &tr_recs, &fold_cfg)?;
        let truth: Vec<SurvivalClass> = val.iter().map(|&c| recs[c].class).collect();
        let pred: Vec<SurvivalClass> = val.iter().map(|&c| model.predict_class(&set.rows[c])).collect();
        let est: Option<Vec<f64>> = val.iter().map(|&c| model.predict_days(&set.rows[c])).collect();
        let true_days: Vec<f64> = val.iter().map(|&c| f64::from(recs[c].days)).collect();
        metrics.push(fold_metrics(&truth, &pred, est.as_deref().map(|e| (true_days.as_slice(), e)))?);
    }
    Ok(SurvivalEvaluation {
        model: cfg.model,
        folds,
        fold_metrics: metrics,
    })
}
