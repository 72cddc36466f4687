//! Fuses radiomic and genomic features, selects columns by RFE and compares
//! SVR, SVC and ANN survival models with 4-fold cross-validation.

use gbm_radiogenomics::phantom::{generate_phantom_dataset, PhantomSpec};
use gbm_radiogenomics::radiogenomics::evaluate::write_survival_metrics;
use gbm_radiogenomics::radiogenomics::{
    evaluate_survival, fuse, ColumnSource, RadiomicTable, SurvivalConfig, SurvivalModelKind,
};
use gbm_radiogenomics::radiomics::{extract_feature_vector, FeatureManifest};
use gbm_radiogenomics::Modality;

fn main() -> gbm_radiogenomics::Result<()> {
    let ds = generate_phantom_dataset(&PhantomSpec { seed: 1, ..Default::default() }, 100)?;
    let manifest = FeatureManifest::default();
    let mut rows = Vec::new();
    for c in &ds.cases {
        let fv = extract_feature_vector(c.mask.as_ref().expect("phantoms carry masks"), c.volume(Modality::T1c)?, &manifest)?;
        rows.push((c.id.clone(), fv.values));
    }
    let table = RadiomicTable { names: manifest.names(), rows };
    let (set, report) = fuse(Some(&table), Some(&ds.genes), None)?;
    println!("fused {} cases x {} columns, dropped {:?}", set.n_cases(), set.n_columns(), report.dropped);

    let base = SurvivalConfig { seed: 1, rfe_target: Some(8), ..Default::default() };
    for (label, src) in [
        ("radiomic", vec![ColumnSource::Radiomic]),
        ("genomic", vec![ColumnSource::Genomic]),
        ("fused", vec![ColumnSource::Radiomic, ColumnSource::Genomic]),
    ] {
        let ev = evaluate_survival(&set.with_sources(&src)?, &ds.survival, &base)?;
        println!("svr on {label:<9} MSE {:>9.0}  accuracy {:.3}", ev.mean_mse().unwrap_or(f64::NAN), ev.average().accuracy);
    }

    let mut evals = Vec::new();
    for model in [SurvivalModelKind::Svr, SurvivalModelKind::Svc, SurvivalModelKind::Ann] {
        evals.push(evaluate_survival(&set, &ds.survival, &SurvivalConfig { model, ..base.clone() })?);
    }
    write_survival_metrics(&evals.iter().collect::<Vec<_>>(), std::io::stdout())?;
    Ok(())
}
