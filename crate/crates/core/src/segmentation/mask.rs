use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{data_err, Error, Result};
use crate::volume::Volume;

pub const NCR_LABEL: i16 = 1;
pub const EDEMA_LABEL: i16 = 2;
pub const ET_LABEL: i16 = 4;

/// Labels in class-index order used by the segmenter output channels.
pub const CLASS_LABELS: [i16; 4] = [0, NCR_LABEL, EDEMA_LABEL, ET_LABEL];

pub fn label_to_class(label: i16) -> Option<usize> {
    CLASS_LABELS.iter().position(|&l| l == label)
}

/// Integer label volume restricted to {0, 1, 2, 4}.
#[derive(Clone, Debug, PartialEq)]
pub struct SegmentationMask(Volume<i16>);

impl SegmentationMask {
    pub fn new(labels: Volume<i16>) -> Result<Self> {
        if let Some(bad) = labels.data().iter().find(|l| label_to_class(**l).is_none()) {
            return Err(data_err(format!("mask contains label {bad}; allowed 0, 1, 2, 4")));
        }
        Ok(Self(labels))
    }

    pub fn volume(&self) -> &Volume<i16> {
        &self.0
    }

    pub fn into_volume(self) -> Volume<i16> {
        self.0
    }

    pub fn dims(&self) -> [usize; 3] {
        self.0.dims()
    }

    pub fn spacing(&self) -> [f64; 3] {
        self.0.spacing()
    }

    pub fn region(&self, r: Region) -> Vec<bool> {
        self.0.data().iter().map(|&l| r.contains(l)).collect()
    }

    pub fn count(&self, r: Region) -> usize {
        self.0.data().iter().filter(|&&l| r.contains(l)).count()
    }
}

/// Label compositions scored and described by the pipeline.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Region {
    /// Enhancing tumor, label 4.
    Et,
    /// Tumor core, labels 1 and 4.
    Tc,
    /// Whole tumor, labels 1, 2 and 4.
    Wt,
    /// Necrotic / non-enhancing core, label 1.
    Ncr,
}

impl Region {
    /// The three regions reported in evaluation tables.
    pub const SCORED: [Region; 3] = [Region::Et, Region::Wt, Region::Tc];

    pub fn labels(self) -> &'static [i16] {
        match self {
            Region::Et => &[ET_LABEL],
            Region::Tc => &[NCR_LABEL, ET_LABEL],
            Region::Wt => &[NCR_LABEL, EDEMA_LABEL, ET_LABEL],
            Region::Ncr => &[NCR_LABEL],
        }
    }

    pub fn contains(self, label: i16) -> bool {
        self.labels().contains(&label)
    }

    pub fn name(self) -> &'static str {
        match self {
            Region::Et => "ET",
            Region::Tc => "TC",
            Region::Wt => "WT",
            Region::Ncr => "NCR",
        }
    }
}

impl fmt::Display for Region {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Region {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "ET" => Ok(Region::Et),
            "TC" => Ok(Region::Tc),
            "WT" => Ok(Region::Wt),
            "NCR" => Ok(Region::Ncr),
            _ => Err(data_err(format!("unknown region `{s}`"))),
        }
    }
}
