//! Trains a conditional GAN that predicts T2 from T1c and Flair, then fills
//! the T2 channel of a case where it is missing.
//!
//! `cargo run --release --example synthesize_missing -- [steps]`

use gbm_radiogenomics::phantom::{generate_phantom_dataset, PhantomSpec};
use gbm_radiogenomics::slices::prepare_all;
use gbm_radiogenomics::synthesis::{synthesize_missing, train_synthesizer, GanTrainConfig, SynthesisTask};
use gbm_radiogenomics::{Modality, Provenance};

fn main() -> gbm_radiogenomics::Result<()> {
    let steps: usize = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(800);
    let ds = generate_phantom_dataset(&PhantomSpec::default(), 16)?;
    let prep = prepare_all(&ds.cases)?;
    let (train, holdout) = prep.split_at(12);

    let task = SynthesisTask::new(&[Modality::T1c, Modality::Flair], Modality::T2)?;
    let cfg = GanTrainConfig { steps, psnr_every: (steps / 5).max(1), ..Default::default() };
    let run = train_synthesizer(&task, train, holdout, &cfg)?;
    for (step, p) in &run.psnr_curve {
        println!("step {step:>5}  holdout PSNR {p:.2} dB");
    }
    if let Some(b) = run.baseline_psnr {
        println!("best input-copy baseline {b:.2} dB");
    }
    run.write_loss_csv(std::fs::File::create("synthesis_losses.csv")?)?;

    let mut case = ds.cases[15].clone();
    case.modalities.remove(&Modality::T2);
    let filled = synthesize_missing(&case, &[run.synthesizer], 0)?;
    for m in Modality::ALL {
        let img = &filled.modalities[&m];
        println!("{:<6} {:?}", m.name(), img.provenance);
    }
    assert_eq!(filled.modalities[&Modality::T2].provenance, Provenance::Synthesized);
    Ok(())
}
