//! Fits a survival regressor on fused features and ranks its inputs by mean
//! absolute SHAP value.

use gbm_radiogenomics::phantom::{generate_phantom_dataset, PhantomSpec};
use gbm_radiogenomics::radiogenomics::shap::write_shap_csv;
use gbm_radiogenomics::radiogenomics::{
    fuse, rank_features_by_shap, shap_attribution, train_survival_model, RadiomicTable, SurvivalConfig,
};
use gbm_radiogenomics::radiomics::{extract_feature_vector, FeatureManifest};
use gbm_radiogenomics::Modality;

fn main() -> gbm_radiogenomics::Result<()> {
    let ds = generate_phantom_dataset(&PhantomSpec { seed: 2, ..Default::default() }, 60)?;
    let manifest = FeatureManifest::default();
    let mut rows = Vec::new();
    for c in &ds.cases {
        let fv = extract_feature_vector(c.mask.as_ref().expect("phantoms carry masks"), c.volume(Modality::T1c)?, &manifest)?;
        rows.push((c.id.clone(), fv.values));
    }
    let (set, _) = fuse(Some(&RadiomicTable { names: manifest.names(), rows }), Some(&ds.genes), None)?;

    let cfg = SurvivalConfig { rfe_target: Some(10), ..Default::default() };
    let model = train_survival_model(&set.rows, &set.names, &ds.survival, &cfg)?;
    let sel = &model.selected;
    let inputs: Vec<Vec<f64>> = set.rows.iter().map(|r| sel.iter().map(|&c| r[c]).collect()).collect();
    let background = &inputs[..16];
    let f = |z: &[f64]| model.predict_selected(z);

    let mut attributions = Vec::new();
    for (i, x) in inputs.iter().enumerate() {
        let sv = shap_attribution(&f, x, background, 64, i as u64)?;
        if i == 0 {
            println!("{}: base {:.1} + sum(phi) {:.1} = prediction {:.1}", set.case_ids[0], sv.base, sv.phi.iter().sum::<f64>(), f(x));
        }
        attributions.push(sv.phi);
    }
    let names: Vec<String> = sel.iter().map(|&c| set.names[c].clone()).collect();
    let sources: Vec<_> = sel.iter().map(|&c| set.sources[c]).collect();
    let ranks = rank_features_by_shap(&names, &sources, &attributions)?;
    write_shap_csv(&ranks, None, std::io::stdout())?;
    Ok(())
}
