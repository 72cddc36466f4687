//! The tumor segmenter, its training loop and fold ensembles.

use std::path::Path;

use octnet::{checkpoint, Fcn, ParamStore, Tensor};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::case::Modality;
use crate::error::{data_err, Error, Result};
use crate::segmentation::mask::{SegmentationMask, CLASS_LABELS};
use crate::slices::{stack_slices, PreparedCase};
use crate::training::{train_step, NetConfig, OptimConfig};
use crate::volume::Volume;

pub const NUM_CLASSES: usize = CLASS_LABELS.len();
const PREDICT_BATCH: usize = 8;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SegmenterDescriptor {
    pub kind: String,
    pub modalities: Vec<Modality>,
    pub net: NetConfig,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SegTrainConfig {
    pub net: NetConfig,
    pub optim: OptimConfig,
    pub lr: f64,
    pub steps: usize,
    pub batch: usize,
    pub seed: u64,
}

impl Default for SegTrainConfig {
    fn default() -> Self {
        Self {
            net: NetConfig::default(),
            optim: OptimConfig::default(),
            lr: 1e-4,
            steps: 300,
            batch: 4,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug)]
pub struct Segmenter {
    desc: SegmenterDescriptor,
    store: ParamStore,
    net: Fcn,
}

impl Segmenter {
    pub fn new(modalities: &[Modality], net: &NetConfig, seed: u64) -> Result<Self> {
        if modalities.is_empty() {
            return Err(Error::Config("segmenter needs at least one input modality".into()));
        }
        let modalities = Modality::canonical(modalities);
        let mut store = ParamStore::new(seed);
        let fcn = Fcn::new(&mut store, net.fcn(modalities.len(), NUM_CLASSES))?;
        Ok(Self {
            desc: SegmenterDescriptor {
                kind: "segmenter".into(),
                modalities,
                net: net.clone(),
            },
            store,
            net: fcn,
        })
    }

    pub fn descriptor(&self) -> &SegmenterDescriptor {
        &self.desc
    }

    pub fn modalities(&self) -> &[Modality] {
        &self.desc.modalities
    }

    pub fn store(&self) -> &ParamStore {
        &self.store
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        Ok(checkpoint::to_bytes(&serde_json::to_value(&self.desc)?, &self.store)?)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let ck = checkpoint::from_bytes(bytes)?;
        let desc: SegmenterDescriptor = serde_json::from_value(ck.descriptor.clone())?;
        if desc.kind != "segmenter" {
            return Err(data_err(format!("checkpoint holds a `{}`, not a segmenter", desc.kind)));
        }
        let mut s = Self::new(&desc.modalities, &desc.net, 0)?;
        ck.restore_into(&mut s.store)?;
        Ok(s)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_bytes()?)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_bytes(&std::fs::read(path)?)
    }

    /// Rounds weights through the archive precision so in-memory and reloaded
    /// models predict identically.
    pub fn quantize(&mut self) {
        checkpoint::quantize_like_archive(&mut self.store);
    }

    /// Softmax probabilities `[X·Y·Z, 4]` in voxel order.
    pub fn predict_probs(&self, case: &PreparedCase) -> Result<Vec<[f64; NUM_CLASSES]>> {
        for m in self.modalities() {
            if !case.has(*m) {
                return Err(data_err(format!(
                    "case {} lacks {m}, required by the segmenter ({:?})",
                    case.id,
                    self.modalities()
                )));
            }
        }
        let [nx, ny, nz] = case.dims;
        let mut probs = vec![[0.0; NUM_CLASSES]; nx * ny * nz];
        let zs: Vec<usize> = (0..nz).collect();
        for chunk in zs.chunks(PREDICT_BATCH) {
            let input = case.stack(chunk, self.modalities())?;
            let logits = self.net.predict(&self.store, &input)?.softmax_channels();
            let hw = nx * ny;
            for (b, &z) in chunk.iter().enumerate() {
                for p in 0..hw {
                    let out = &mut probs[p * nz + z];
                    for (k, o) in out.iter_mut().enumerate() {
                        *o = logits.data()[(b * NUM_CLASSES + k) * hw + p];
                    }
                }
            }
        }
        Ok(probs)
    }

    pub fn predict_mask(&self, case: &PreparedCase) -> Result<SegmentationMask> {
        FoldEnsemble::new(vec![self.clone()])?.predict_mask(case)
    }
}

/// Per-voxel argmax mapped back to BraTS labels.
pub fn probs_to_mask(probs: &[[f64; NUM_CLASSES]], dims: [usize; 3], spacing: [f64; 3]) -> Result<SegmentationMask> {
    let labels = probs
        .iter()
        .map(|p| {
            let mut best = 0;
            for k in 1..NUM_CLASSES {
                if p[k] > p[best] {
                    best = k;
                }
            }
            CLASS_LABELS[best]
        })
        .collect();
    SegmentationMask::new(Volume::new(dims, spacing, [0.0; 3], labels)?)
}

/// Segmenters averaged in probability space.
#[derive(Clone, Debug)]
pub struct FoldEnsemble {
    pub members: Vec<Segmenter>,
}

impl FoldEnsemble {
    pub fn new(members: Vec<Segmenter>) -> Result<Self> {
        let first = members.first().ok_or_else(|| Error::Config("ensemble needs at least one member".into()))?;
        if members.iter().any(|m| m.modalities() != first.modalities()) {
            return Err(Error::Config("ensemble members disagree on input modalities".into()));
        }
        Ok(Self { members })
    }

    pub fn mean_probs(&self, case: &PreparedCase) -> Result<Vec<[f64; NUM_CLASSES]>> {
        let mut acc = self.members[0].predict_probs(case)?;
        for m in &self.members[1..] {
            for (a, p) in acc.iter_mut().zip(m.predict_probs(case)?) {
                for k in 0..NUM_CLASSES {
                    a[k] += p[k];
                }
            }
        }
        let n = self.members.len() as f64;
        for a in &mut acc {
            for v in a.iter_mut() {
                *v /= n;
            }
        }
        Ok(acc)
    }

    pub fn predict_mask(&self, case: &PreparedCase) -> Result<SegmentationMask> {
        probs_to_mask(&self.mean_probs(case)?, case.dims, case.spacing)
    }
}

/// Inverse-frequency class weights `N / (K·n_k)` over the pixels of the given slices;
/// classes absent from the data get weight 0.
pub fn class_weights(cases: &[PreparedCase], slices: &[(usize, usize)]) -> Result<Vec<f64>> {
    let mut counts = [0usize; NUM_CLASSES];
    let mut buf = Vec::new();
    for &(c, z) in slices {
        buf.clear();
        cases[c].slice_classes(z, &mut buf)?;
        for &k in &buf {
            counts[k] += 1;
        }
    }
    let total: usize = counts.iter().sum();
    Ok(counts
        .iter()
        .map(|&n| if n == 0 { 0.0 } else { total as f64 / (NUM_CLASSES as f64 * n as f64) })
        .collect())
}

#[derive(Clone, Debug)]
pub struct SegTraining {
    pub model: Segmenter,
    pub losses: Vec<f64>,
    pub class_weights: Vec<f64>,
}

pub fn train_segmenter(cases: &[PreparedCase], modalities: &[Modality], cfg: &SegTrainConfig) -> Result<SegTraining> {
    if cases.is_empty() {
        return Err(data_err("segmentation training set is empty"));
    }
    if cfg.batch == 0 {
        return Err(Error::Config("batch must be positive".into()));
    }
    let mut slices = Vec::new();
    for (c, case) in cases.iter().enumerate() {
        if case.classes.is_none() {
            return Err(data_err(format!("training case {} has no mask", case.id)));
        }
        slices.extend(case.informative_slices().into_iter().map(|z| (c, z)));
    }
    if slices.is_empty() {
        return Err(data_err("no training slice touches the image support"));
    }
    let weights = class_weights(cases, &slices)?;
    let mut model = Segmenter::new(modalities, &cfg.net, cfg.seed)?;
    let mods = model.modalities().to_vec();
    let mut opt = cfg.optim.adam(cfg.lr)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x5e9);
    let mut losses = Vec::with_capacity(cfg.steps);
    for _ in 0..cfg.steps {
        let picks: Vec<(usize, usize)> = (0..cfg.batch).map(|_| slices[rng.random_range(0..slices.len())]).collect();
        let input = stack_slices(picks.iter().map(|&(c, z)| (&cases[c], z)), &mods)?;
        let mut labels = Vec::new();
        for &(c, z) in &picks {
            cases[c].slice_classes(z, &mut labels)?;
        }
        let net = &model.net;
        let w = weights.clone();
        let loss = train_step(&mut model.store, &mut opt, |g| {
            let x = g.input(input);
            let y = net.forward(g, x)?;
            Ok(g.cross_entropy(y, labels, w))
        })?;
        losses.push(loss);
    }
    model.quantize();
    Ok(SegTraining {
        model,
        losses,
        class_weights: weights,
    })
}

/// Mean weighted cross-entropy of a model over every informative slice of `cases`.
pub fn evaluation_loss(model: &Segmenter, cases: &[PreparedCase], weights: &[f64]) -> Result<f64> {
    let mut total = 0.0;
    let mut n = 0.0_f64;
    for case in cases {
        for z in case.informative_slices() {
            let input: Tensor = case.stack(&[z], model.modalities())?;
            let mut labels = Vec::new();
            case.slice_classes(z, &mut labels)?;
            let mut g = octnet::Graph::new(&model.store, octnet::Mode::Eval);
            let x = g.input(input);
            let y = model.net.forward(&mut g, x)?;
            let l = g.cross_entropy(y, labels, weights.to_vec());
            total += g.value(l).data()[0];
            n += 1.0;
        }
    }
    Ok(total / n.max(1.0))
}
