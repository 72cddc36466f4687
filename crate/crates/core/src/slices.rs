//! Normalized per-case arrays and their axial-slice batches for the 2D networks.

use std::collections::BTreeMap;

use octnet::Tensor;

use crate::case::{CaseRecord, Modality};
use crate::error::{data_err, Result};
use crate::normalize::{nonzero_support, normalize_intensity};
use crate::segmentation::mask::label_to_class;

/// A case with every modality normalized to [0, 1] over its nonzero support.
#[derive(Clone, Debug)]
pub struct PreparedCase {
    pub id: String,
    pub dims: [usize; 3],
    pub spacing: [f64; 3],
    pub channels: BTreeMap<Modality, Vec<f32>>,
    /// Class indices (0..4) when a mask is present.
    pub classes: Option<Vec<u8>>,
    /// Union of the modality supports.
    pub support: Vec<bool>,
    pub warnings: Vec<String>,
}

impl PreparedCase {
    pub fn new(case: &CaseRecord) -> Result<Self> {
        case.validate()?;
        let dims = case.dims().ok_or_else(|| data_err(format!("case {} is empty", case.id)))?;
        let first = case
            .modalities
            .values()
            .next()
            .map(|i| i.volume.spacing())
            .or(case.mask.as_ref().map(|m| m.spacing()))
            .unwrap_or([1.0; 3]);
        let n: usize = dims.iter().product();
        let mut support = vec![false; n];
        let mut channels = BTreeMap::new();
        let mut warnings = Vec::new();
        for (m, img) in &case.modalities {
            let s = nonzero_support(&img.volume);
            for (u, &v) in support.iter_mut().zip(&s) {
                *u |= v;
            }
            let norm = normalize_intensity(&img.volume, &s)?;
            if let Some(w) = norm.warning {
                warnings.push(format!("case {} {m}: {w}", case.id));
            }
            channels.insert(*m, norm.volume.data().to_vec());
        }
        let classes = case
            .mask
            .as_ref()
            .map(|mk| mk.volume().data().iter().map(|&l| label_to_class(l).unwrap() as u8).collect());
        Ok(Self {
            id: case.id.clone(),
            dims,
            spacing: first,
            channels,
            classes,
            support,
            warnings,
        })
    }

    pub fn has(&self, m: Modality) -> bool {
        self.channels.contains_key(&m)
    }

    fn channel(&self, m: Modality) -> Result<&[f32]> {
        self.channels
            .get(&m)
            .map(Vec::as_slice)
            .ok_or_else(|| data_err(format!("case {} has no {m} volume", self.id)))
    }

    /// Axial slice indices that touch the support.
    pub fn informative_slices(&self) -> Vec<usize> {
        let [nx, ny, nz] = self.dims;
        (0..nz)
            .filter(|&z| (0..nx * ny).any(|p| self.support[p * nz + z]))
            .collect()
    }

    /// `C×X×Y` values of slice `z` for the listed modalities.
    pub fn slice_input(&self, z: usize, modalities: &[Modality], out: &mut Vec<f64>) -> Result<()> {
        let [nx, ny, nz] = self.dims;
        for &m in modalities {
            let ch = self.channel(m)?;
            out.extend((0..nx * ny).map(|p| f64::from(ch[p * nz + z])));
        }
        Ok(())
    }

    pub fn slice_classes(&self, z: usize, out: &mut Vec<usize>) -> Result<()> {
        let [nx, ny, nz] = self.dims;
        let cls = self.classes.as_ref().ok_or_else(|| data_err(format!("case {} has no mask", self.id)))?;
        out.extend((0..nx * ny).map(|p| usize::from(cls[p * nz + z])));
        Ok(())
    }

    /// Batch tensor `[B, C, X, Y]` of the given slices.
    pub fn stack(&self, zs: &[usize], modalities: &[Modality]) -> Result<Tensor> {
        stack_slices(zs.iter().map(|&z| (self, z)), modalities)
    }
}

pub fn stack_slices<'a>(items: impl IntoIterator<Item = (&'a PreparedCase, usize)>, modalities: &[Modality]) -> Result<Tensor> {
    let mut data = Vec::new();
    let mut count = 0;
    let mut hw = None;
    for (case, z) in items {
        let [nx, ny, _] = case.dims;
        if *hw.get_or_insert((nx, ny)) != (nx, ny) {
            return Err(data_err("slices in one batch must share in-plane dims"));
        }
        case.slice_input(z, modalities, &mut data)?;
        count += 1;
    }
    let (nx, ny) = hw.ok_or_else(|| data_err("empty slice batch"))?;
    Ok(Tensor::from_vec(&[count, modalities.len(), nx, ny], data)?)
}

pub fn prepare_all(cases: &[CaseRecord]) -> Result<Vec<PreparedCase>> {
    cases.iter().map(PreparedCase::new).collect()
}
