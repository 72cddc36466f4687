//! Generates a small synthetic cohort and writes it as a dataset directory.
//!
//! `cargo run --release --example phantom_cohort -- [n_cases] [out_dir]`

use gbm_radiogenomics::dataset::{load_dataset, save_dataset, Dataset};
use gbm_radiogenomics::radiogenomics::Thresholds;
use gbm_radiogenomics::phantom::{check_nesting, generate_phantom_dataset, PhantomSpec};
use gbm_radiogenomics::segmentation::Region;
use gbm_radiogenomics::Modality;

fn main() -> gbm_radiogenomics::Result<()> {
    let mut args = std::env::args().skip(1);
    let n: usize = args.next().and_then(|s| s.parse().ok()).unwrap_or(6);
    let out = args.next().unwrap_or_else(|| "phantom_cohort".into());

    let spec = PhantomSpec { seed: 7, ..Default::default() };
    let ds = generate_phantom_dataset(&spec, n)?;
    println!("{:<10} {:>7} {:>7} {:>7} {:>6}", "case", "WT", "TC", "ET", "days");
    for (case, rec) in ds.cases.iter().zip(&ds.survival) {
        let mask = case.mask.as_ref().expect("phantoms carry masks");
        check_nesting(mask)?;
        println!(
            "{:<10} {:>7} {:>7} {:>7} {:>6}",
            case.id,
            mask.count(Region::Wt),
            mask.count(Region::Tc),
            mask.count(Region::Et),
            rec.days
        );
    }
    println!("planted gene columns: {:?}", ds.planted_gene_columns);

    let dataset = Dataset { cases: ds.cases.clone(), genes: Some(ds.genes.clone()), survival: Some(ds.survival.clone()) };
    save_dataset(&out, &dataset)?;
    let back = load_dataset(&out, &Thresholds::default())?;
    let t1c = back.cases[0].volume(Modality::T1c)?;
    println!("wrote {out}/ ({} cases, grid {:?}, spacing {:?} mm)", back.cases.len(), t1c.dims(), t1c.spacing());
    Ok(())
}
