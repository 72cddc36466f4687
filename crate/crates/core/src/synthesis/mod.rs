//! Cross-modality synthesis with a conditional GAN: the octave FCN as generator,
//! a light encoder-decoder discriminator, and filling of missing modalities.

pub mod discriminator;
pub mod loss;
pub mod model;
pub mod train;

use octnet::Tensor;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::case::{CaseRecord, Modality, Provenance};
use crate::error::{data_err, Error, Result};
use crate::slices::PreparedCase;
use crate::volume::Volume;

pub use discriminator::{Discriminator, DiscriminatorConfig};
pub use loss::{gan_loss, psnr, GanLosses, GanObjective};
pub use model::{SynthesisTask, Synthesizer};
pub use train::{train_synthesizer, GanTrainConfig, GanTraining, StepLosses};

const SYNTH_BATCH: usize = 8;

/// The synthesizer for `target` whose sources are all real in `available`,
/// preferring the one that uses the most sources.
pub fn pick_synthesizer<'a>(synths: &'a [Synthesizer], target: Modality, available: &[Modality]) -> Option<&'a Synthesizer> {
    synths
        .iter()
        .filter(|s| s.task().target == target && s.task().sources.iter().all(|m| available.contains(m)))
        .max_by_key(|s| s.task().sources.len())
}

/// Fills every absent modality slice by slice from real ones. Synthesized
/// volumes are on the normalized [0, 1] scale and zero outside the case support.
pub fn synthesize_missing(case: &CaseRecord, synths: &[Synthesizer], seed: u64) -> Result<CaseRecord> {
    let real: Vec<Modality> = case
        .modalities
        .iter()
        .filter(|(_, img)| img.provenance == Provenance::Real)
        .map(|(m, _)| *m)
        .collect();
    if real.is_empty() {
        return Err(data_err(format!("case {} has no real modality", case.id)));
    }
    let missing: Vec<Modality> = Modality::ALL.into_iter().filter(|m| !case.modalities.contains_key(m)).collect();
    if missing.is_empty() {
        return Ok(case.clone());
    }
    let unfillable: Vec<Modality> = missing
        .iter()
        .copied()
        .filter(|&m| pick_synthesizer(synths, m, &real).is_none())
        .collect();
    if !unfillable.is_empty() {
        return Err(Error::Unfillable {
            case: case.id.clone(),
            missing: unfillable.iter().map(|m| m.name().to_string()).collect(),
            available: real.iter().map(|m| m.name().to_string()).collect(),
        });
    }
    let prepared = PreparedCase::new(case)?;
    let grid = case.volume(real[0])?;
    let [nx, ny, nz] = prepared.dims;
    let mut out = case.clone();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for m in missing {
        let synth = pick_synthesizer(synths, m, &real).expect("checked above");
        let mut vol = Volume::<f32>::new(prepared.dims, grid.spacing(), grid.origin(), vec![0.0; nx * ny * nz])?;
        let zs: Vec<usize> = (0..nz).collect();
        for chunk in zs.chunks(SYNTH_BATCH) {
            let src = prepared.stack(chunk, &synth.task().sources)?;
            let noise = Tensor::randn(&[chunk.len(), synth.task().noise_channels, nx, ny], 1.0, &mut rng);
            let y = synth.forward(&src, &noise)?;
            for (b, &z) in chunk.iter().enumerate() {
                for p in 0..nx * ny {
                    let i = p * nz + z;
                    if prepared.support[i] {
                        vol.data_mut()[i] = y.data()[b * nx * ny + p] as f32;
                    }
                }
            }
        }
        out.insert(m, vol, Provenance::Synthesized)?;
    }
    Ok(out)
}
