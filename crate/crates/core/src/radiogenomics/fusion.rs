//! Column-wise fusion of radiomic, genomic and clinical features, and
//! train-split standardization.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{data_err, Error, Result};
use crate::radiogenomics::genes::GeneExpressionMatrix;
use crate::radiogenomics::survival::SurvivalRecord;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ColumnSource {
    Radiomic,
    Genomic,
    Clinical,
}

impl ColumnSource {
    pub fn name(self) -> &'static str {
        match self {
            ColumnSource::Radiomic => "radiomic",
            ColumnSource::Genomic => "genomic",
            ColumnSource::Clinical => "clinical",
        }
    }
}

impl std::str::FromStr for ColumnSource {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "radiomic" => Ok(ColumnSource::Radiomic),
            "genomic" => Ok(ColumnSource::Genomic),
            "clinical" => Ok(ColumnSource::Clinical),
            _ => Err(Error::Config(format!("unknown feature source `{s}`"))),
        }
    }
}

/// Radiomic feature table: column names and `(case_id, values)` rows.
#[derive(Clone, Debug, PartialEq)]
pub struct RadiomicTable {
    pub names: Vec<String>,
    pub rows: Vec<(String, Vec<f64>)>,
}

/// Cases × columns, row-major, with a source tag per column.
#[derive(Clone, Debug, PartialEq)]
pub struct FusedFeatureSet {
    pub case_ids: Vec<String>,
    pub names: Vec<String>,
    pub sources: Vec<ColumnSource>,
    pub rows: Vec<Vec<f64>>,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct FusionReport {
    /// Cases present in some source but missing from another.
    pub dropped: Vec<String>,
}

impl FusedFeatureSet {
    pub fn n_cases(&self) -> usize {
        self.rows.len()
    }

    pub fn n_columns(&self) -> usize {
        self.names.len()
    }

    pub fn count(&self, src: ColumnSource) -> usize {
        self.sources.iter().filter(|&&s| s == src).count()
    }

    /// Keeps the columns at `cols`, in that order.
    pub fn select_columns(&self, cols: &[usize]) -> Result<Self> {
        if let Some(&c) = cols.iter().find(|&&c| c >= self.n_columns()) {
            return Err(data_err(format!("column {c} out of range ({} columns)", self.n_columns())));
        }
        Ok(Self {
            case_ids: self.case_ids.clone(),
            names: cols.iter().map(|&c| self.names[c].clone()).collect(),
            sources: cols.iter().map(|&c| self.sources[c]).collect(),
            rows: self.rows.iter().map(|r| cols.iter().map(|&c| r[c]).collect()).collect(),
        })
    }

    pub fn with_sources(&self, keep: &[ColumnSource]) -> Result<Self> {
        let cols: Vec<usize> = (0..self.n_columns()).filter(|&c| keep.contains(&self.sources[c])).collect();
        if cols.is_empty() {
            return Err(data_err(format!("no columns from {keep:?}")));
        }
        self.select_columns(&cols)
    }

    pub fn select_rows(&self, idx: &[usize]) -> Self {
        Self {
            case_ids: idx.iter().map(|&i| self.case_ids[i].clone()).collect(),
            names: self.names.clone(),
            sources: self.sources.clone(),
            rows: idx.iter().map(|&i| self.rows[i].clone()).collect(),
        }
    }
}

/// Joins the sources on case id, in radiomic-table order. Age becomes one
/// clinical column when `survival` is given and every kept case has it.
pub fn fuse(
    radiomic: Option<&RadiomicTable>,
    genomic: Option<&GeneExpressionMatrix>,
    survival: Option<&[SurvivalRecord]>,
) -> Result<(FusedFeatureSet, FusionReport)> {
    if radiomic.is_none() && genomic.is_none() {
        return Err(Error::Config("fusion needs radiomic or genomic features".into()));
    }
    let mut all: BTreeSet<&str> = BTreeSet::new();
    let order: Vec<&str> = match (radiomic, genomic) {
        (Some(r), _) => r.rows.iter().map(|(id, _)| id.as_str()).collect(),
        (None, Some(g)) => g.patients().iter().map(String::as_str).collect(),
        _ => unreachable!(),
    };
    all.extend(order.iter().copied());
    if let Some(g) = genomic {
        all.extend(g.patients().iter().map(String::as_str));
    }
    let age_of = |id: &str| survival.and_then(|s| s.iter().find(|r| r.id == id)).and_then(|r| r.age);
    let kept: Vec<&str> = order
        .iter()
        .copied()
        .filter(|id| genomic.is_none_or(|g| g.row_of(id).is_some()))
        .filter(|id| survival.is_none_or(|s| s.iter().any(|r| r.id == *id)))
        .collect();
    if kept.is_empty() {
        return Err(data_err("feature sources share no case ids"));
    }
    let use_age = survival.is_some() && kept.iter().all(|id| age_of(id).is_some());
    let mut names = Vec::new();
    let mut sources = Vec::new();
    if let Some(r) = radiomic {
        names.extend(r.names.iter().cloned());
        sources.extend(std::iter::repeat_n(ColumnSource::Radiomic, r.names.len()));
    }
    if let Some(g) = genomic {
        names.extend(g.genes().iter().cloned());
        sources.extend(std::iter::repeat_n(ColumnSource::Genomic, g.n_genes()));
    }
    if use_age {
        names.push("age".into());
        sources.push(ColumnSource::Clinical);
    }
    let mut rows = Vec::with_capacity(kept.len());
    for id in &kept {
        let mut row = Vec::with_capacity(names.len());
        if let Some(r) = radiomic {
            let vals = &r.rows.iter().find(|(k, _)| k == id).expect("kept ids come from the table").1;
            if vals.len() != r.names.len() {
                return Err(data_err(format!("case {id}: {} radiomic values for {} names", vals.len(), r.names.len())));
            }
            row.extend_from_slice(vals);
        }
        if let Some(g) = genomic {
            row.extend_from_slice(g.row_of(id).expect("filtered above"));
        }
        if use_age {
            row.push(age_of(id).expect("checked above"));
        }
        rows.push(row);
    }
    let kept_set: BTreeSet<&str> = kept.iter().copied().collect();
    let dropped = all.difference(&kept_set).map(|s| s.to_string()).collect();
    Ok((
        FusedFeatureSet {
            case_ids: kept.iter().map(|s| s.to_string()).collect(),
            names,
            sources,
            rows,
        },
        FusionReport { dropped },
    ))
}

/// Per-column mean and standard deviation; constant columns keep scale 1.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Standardizer {
    pub fn fit(rows: &[Vec<f64>]) -> Result<Self> {
        let first = rows.first().ok_or_else(|| data_err("cannot standardize zero rows"))?;
        let d = first.len();
        let n = rows.len() as f64;
        let mut mean = vec![0.0; d];
        for r in rows {
            if r.len() != d {
                return Err(data_err("ragged feature rows"));
            }
            for (m, v) in mean.iter_mut().zip(r) {
                *m += v / n;
            }
        }
        let mut std = vec![0.0; d];
        for r in rows {
            for ((s, v), m) in std.iter_mut().zip(r).zip(&mean) {
                *s += (v - m).powi(2) / n;
            }
        }
        let std = std.into_iter().map(|v| if v > 1e-24 { v.sqrt() } else { 1.0 }).collect();
        Ok(Self { mean, std })
    }

    pub fn transform_row(&self, r: &[f64]) -> Vec<f64> {
        r.iter().zip(&self.mean).zip(&self.std).map(|((v, m), s)| (v - m) / s).collect()
    }

    pub fn transform(&self, rows: &[Vec<f64>]) -> Vec<Vec<f64>> {
        rows.iter().map(|r| self.transform_row(r)).collect()
    }
}
