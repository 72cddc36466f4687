//! Per-patient records: modality volumes with provenance, optional mask.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{data_err, Error, Result};
use crate::segmentation::SegmentationMask;
use crate::volume::Volume;

/// MRI contrasts handled by the pipeline, in their fixed channel order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Modality {
    T1c,
    Flair,
    T2,
}

impl Modality {
    pub const ALL: [Modality; 3] = [Modality::T1c, Modality::Flair, Modality::T2];

    pub fn name(self) -> &'static str {
        match self {
            Modality::T1c => "T1c",
            Modality::Flair => "Flair",
            Modality::T2 => "T2",
        }
    }

    /// Sorts into channel order and removes duplicates.
    pub fn canonical(list: &[Modality]) -> Vec<Modality> {
        let mut v = list.to_vec();
        v.sort();
        v.dedup();
        v
    }
}

impl fmt::Display for Modality {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Modality {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "t1c" | "t1ce" => Ok(Modality::T1c),
            "flair" => Ok(Modality::Flair),
            "t2" => Ok(Modality::T2),
            _ => Err(data_err(format!("unknown modality `{s}`"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Provenance {
    Real,
    Synthesized,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ModalityImage {
    pub volume: Volume<f32>,
    pub provenance: Provenance,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CaseRecord {
    pub id: String,
    pub modalities: BTreeMap<Modality, ModalityImage>,
    pub mask: Option<SegmentationMask>,
}

impl CaseRecord {
    pub fn new(id: impl Into<String>) -> Self {
        Self {
            id: id.into(),
            modalities: BTreeMap::new(),
            mask: None,
        }
    }

    pub fn insert(&mut self, m: Modality, volume: Volume<f32>, provenance: Provenance) -> Result<()> {
        if let Some(first) = self.modalities.values().next() {
            if !first.volume.same_grid(&volume) {
                return Err(data_err(format!("case {}: {m} grid differs from other modalities", self.id)));
            }
        }
        self.modalities.insert(m, ModalityImage { volume, provenance });
        Ok(())
    }

    pub fn available(&self) -> Vec<Modality> {
        self.modalities.keys().copied().collect()
    }

    pub fn volume(&self, m: Modality) -> Result<&Volume<f32>> {
        self.modalities
            .get(&m)
            .map(|img| &img.volume)
            .ok_or_else(|| data_err(format!("case {} has no {m} volume", self.id)))
    }

    pub fn dims(&self) -> Option<[usize; 3]> {
        self.modalities.values().next().map(|i| i.volume.dims()).or(self.mask.as_ref().map(|m| m.volume().dims()))
    }

    /// All volumes (and the mask) share dims and spacing.
    pub fn validate(&self) -> Result<()> {
        let mut grids = self.modalities.values().map(|i| (i.volume.dims(), i.volume.spacing()));
        if let Some(mask) = &self.mask {
            let g = (mask.volume().dims(), mask.volume().spacing());
            if grids.any(|x| x != g) {
                return Err(data_err(format!("case {}: mask grid differs from images", self.id)));
            }
        }
        let first = self.modalities.values().next();
        if let Some(f) = first {
            for (m, img) in &self.modalities {
                if !img.volume.same_grid(&f.volume) {
                    return Err(data_err(format!("case {}: {m} grid differs", self.id)));
                }
            }
        }
        Ok(())
    }
}
