//! Trains the segmentation network on phantoms and reports region dice and
//! Hausdorff distance on held-out cases.
//!
//! `cargo run --release --example segment_phantoms -- [steps]`

use gbm_radiogenomics::phantom::{generate_phantom_dataset, PhantomSpec};
use gbm_radiogenomics::segmentation::{mean_scores, score_case, train_segmenter, write_metrics_csv, SegTrainConfig};
use gbm_radiogenomics::slices::prepare_all;
use gbm_radiogenomics::Modality;

fn main() -> gbm_radiogenomics::Result<()> {
    let steps: usize = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(1500);
    let ds = generate_phantom_dataset(&PhantomSpec::default(), 16)?;
    let prep = prepare_all(&ds.cases)?;
    let (train, test) = prep.split_at(12);

    let cfg = SegTrainConfig { lr: 2e-3, steps, ..Default::default() };
    let run = train_segmenter(train, &Modality::ALL, &cfg)?;
    println!("loss {:.3} -> {:.3}, class weights {:?}", run.losses[0], run.losses[run.losses.len() - 1], run.class_weights);

    let mut rows = Vec::new();
    for case in test {
        rows.push((case.id.clone(), score_case(&run.model, case)?));
    }
    let mean = mean_scores(&rows.iter().map(|(_, s)| s.clone()).collect::<Vec<_>>())?;
    println!("dice  ET {:.3}  WT {:.3}  TC {:.3}", mean.et.dice, mean.wt.dice, mean.tc.dice);
    println!("hd95  WT {:?} mm", mean.wt.hd95);
    write_metrics_csv(&rows, std::io::stdout())?;
    run.model.save("segmenter.safetensors")?;
    Ok(())
}
