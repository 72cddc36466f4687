//! Staged workflow: phantom generation, synthesis, segmentation, feature
//! extraction, survival modelling, attribution and reporting. Each command
//! reads earlier artifacts from the output directory, writes its own there,
//! and records a `run_<command>.json` with the config hash and seed.

pub mod config;
pub mod plot;

use std::fs::File;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::case::{Modality, Provenance};
use crate::dataset::{load_dataset, save_dataset, Dataset};
use crate::error::{data_err, Error, Result};
use crate::phantom::generate_phantom_dataset;
use crate::radiogenomics::fusion::{fuse, ColumnSource, FusedFeatureSet, RadiomicTable};
use crate::radiogenomics::shap::{rank_features_by_shap, shap_attribution, write_shap_csv};
use crate::radiogenomics::{evaluate_survival, train_survival_model, SurvivalConfig, SurvivalModel};
use crate::radiomics::{extract_feature_vector, read_features_csv, write_features_csv, FeatureManifest};
use crate::segmentation::{
    cross_validate_segmentation, evaluate_regions, mean_scores, modality_ablation, reference_mask, subset_name, write_metrics_csv,
    FoldEnsemble, RegionScores, SegmentationMask, Segmenter,
};
use crate::slices::{prepare_all, PreparedCase};
use crate::synthesis::{synthesize_missing, train_synthesizer, SynthesisTask, Synthesizer};
use crate::volume::Volume;

pub use config::PipelineConfig;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Command {
    PhantomGenerate,
    SynthTrain,
    SynthApply,
    SegTrain,
    SegPredict,
    SegEval,
    AblateModalities,
    FeaturesExtract,
    SurvivalTrain,
    SurvivalEval,
    Explain,
    Report,
}

impl Command {
    pub const ALL: [Command; 12] = [
        Command::PhantomGenerate,
        Command::SynthTrain,
        Command::SynthApply,
        Command::SegTrain,
        Command::SegPredict,
        Command::SegEval,
        Command::AblateModalities,
        Command::FeaturesExtract,
        Command::SurvivalTrain,
        Command::SurvivalEval,
        Command::Explain,
        Command::Report,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Command::PhantomGenerate => "phantom-generate",
            Command::SynthTrain => "synth-train",
            Command::SynthApply => "synth-apply",
            Command::SegTrain => "seg-train",
            Command::SegPredict => "seg-predict",
            Command::SegEval => "seg-eval",
            Command::AblateModalities => "ablate-modalities",
            Command::FeaturesExtract => "features-extract",
            Command::SurvivalTrain => "survival-train",
            Command::SurvivalEval => "survival-eval",
            Command::Explain => "explain",
            Command::Report => "report",
        }
    }
}

impl std::str::FromStr for Command {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Command::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown command `{s}`")))
    }
}

/// Command-line overrides.
#[derive(Clone, Debug, Default)]
pub struct RunOptions {
    pub config: Option<PathBuf>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
}

impl RunOptions {
    pub fn resolve(&self) -> Result<PipelineConfig> {
        let mut cfg = match &self.config {
            Some(p) => PipelineConfig::load(p)?,
            None => PipelineConfig::default(),
        };
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(o) = &self.out {
            cfg.out = o.clone();
        }
        cfg.finalize()
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct RunMetadata {
    pub command: String,
    pub seed: u64,
    pub config_sha256: String,
    pub version: String,
    /// Paths relative to the output directory.
    pub outputs: Vec<String>,
}

/// Runs `cmd` with the resolved configuration and returns its metadata.
pub fn run(cmd: Command, cfg: &PipelineConfig) -> Result<RunMetadata> {
    std::fs::create_dir_all(&cfg.out)?;
    let mut ctx = Ctx { cfg, outputs: Vec::new() };
    match cmd {
        Command::PhantomGenerate => ctx.phantom_generate()?,
        Command::SynthTrain => ctx.synth_train()?,
        Command::SynthApply => ctx.synth_apply()?,
        Command::SegTrain => ctx.seg_train()?,
        Command::SegPredict => ctx.seg_predict()?,
        Command::SegEval => ctx.seg_eval()?,
        Command::AblateModalities => ctx.ablate()?,
        Command::FeaturesExtract => ctx.features_extract()?,
        Command::SurvivalTrain => ctx.survival_train()?,
        Command::SurvivalEval => ctx.survival_eval()?,
        Command::Explain => ctx.explain()?,
        Command::Report => ctx.report()?,
    }
    let meta = RunMetadata {
        command: cmd.name().into(),
        seed: cfg.seed,
        config_sha256: cfg.hash()?,
        version: env!("CARGO_PKG_VERSION").into(),
        outputs: ctx.outputs,
    };
    std::fs::write(cfg.out.join(format!("run_{}.json", cmd.name())), serde_json::to_string_pretty(&meta)?)?;
    Ok(meta)
}

/// Deterministic case split: `(train, test)` index lists, each ascending.
pub fn split_cases(n: usize, test_fraction: f64, seed: u64) -> (Vec<usize>, Vec<usize>) {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed ^ 0x5b1));
    let mut n_test = (n as f64 * test_fraction).round() as usize;
    if test_fraction > 0.0 && n >= 2 {
        n_test = n_test.clamp(1, n - 1);
    }
    let mut test = order[..n_test].to_vec();
    let mut train = order[n_test..].to_vec();
    test.sort_unstable();
    train.sort_unstable();
    (train, test)
}

pub fn task_file_stem(t: &SynthesisTask) -> String {
    format!("{}_to_{}", subset_name(&t.sources), t.target.name())
}

struct Ctx<'a> {
    cfg: &'a PipelineConfig,
    outputs: Vec<String>,
}

impl Ctx<'_> {
    fn out(&self, rel: &str) -> Result<PathBuf> {
        let p = self.cfg.out.join(rel);
        if let Some(dir) = p.parent() {
            std::fs::create_dir_all(dir)?;
        }
        Ok(p)
    }

    fn create(&mut self, rel: &str) -> Result<File> {
        let f = File::create(self.out(rel)?)?;
        self.outputs.push(rel.to_string());
        Ok(f)
    }

    fn write(&mut self, rel: &str, bytes: impl AsRef<[u8]>) -> Result<()> {
        std::fs::write(self.out(rel)?, bytes)?;
        self.outputs.push(rel.to_string());
        Ok(())
    }

    fn existing(&self, rel: &str, producer: Command) -> Result<PathBuf> {
        let p = self.cfg.out.join(rel);
        if !p.exists() {
            return Err(data_err(format!("{} not found; run `{}` first", p.display(), producer.name())));
        }
        Ok(p)
    }

    fn dataset(&self) -> Result<Dataset> {
        let root = self.cfg.dataset_root();
        if !root.join(crate::dataset::MANIFEST_FILE).exists() {
            return Err(data_err(format!(
                "no dataset at {}; run `phantom-generate` or set `dataset`",
                root.display()
            )));
        }
        load_dataset(&root, &self.cfg.survival.train.thresholds)
    }

    fn prepared(&self) -> Result<Vec<PreparedCase>> {
        prepare_all(&self.dataset()?.cases)
    }

    fn phantom_generate(&mut self) -> Result<()> {
        let p = &self.cfg.phantom;
        let ds = generate_phantom_dataset(&p.spec, p.n_cases)?;
        save_dataset(
            self.cfg.out.join("dataset"),
            &Dataset {
                cases: ds.cases.clone(),
                genes: Some(ds.genes.clone()),
                survival: Some(ds.survival.clone()),
            },
        )?;
        self.outputs.push("dataset/manifest.json".into());
        let mut w = csv::Writer::from_writer(self.create("phantom_truth.csv")?);
        let mut header = vec!["case_id".to_string(), "size_factor".into(), "roughness_factor".into(), "wt_voxels".into()];
        header.extend(ds.planted_gene_columns.iter().map(|&c| ds.genes.genes()[c].clone()));
        w.write_record(&header)?;
        for t in &ds.truth {
            let mut rec = vec![t.id.clone(), format!("{:?}", t.size_factor), format!("{:?}", t.roughness_factor), t.wt_voxels.to_string()];
            rec.extend(t.planted_genes.iter().map(|g| format!("{g:?}")));
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }

    fn synth_train(&mut self) -> Result<()> {
        let cases = self.prepared()?;
        let s = &self.cfg.synthesis;
        let (train_idx, hold_idx) = split_cases(cases.len(), s.holdout_fraction, self.cfg.seed);
        let pick = |idx: &[usize]| idx.iter().map(|&i| cases[i].clone()).collect::<Vec<_>>();
        let (train, hold) = (pick(&train_idx), pick(&hold_idx));
        let mut summary = Vec::new();
        for task in &s.tasks {
            let run = train_synthesizer(task, &train, &hold, &s.train)?;
            let stem = task_file_stem(task);
            let bytes = run.synthesizer.to_bytes()?;
            self.write(&format!("synth/{stem}.safetensors"), bytes)?;
            run.write_loss_csv(self.create(&format!("synth/{stem}_loss.csv"))?)?;
            let first = run.psnr_curve.first().map(|p| p.1);
            let last = run.psnr_curve.last().map(|p| p.1);
            summary.push((task.name(), s.train.steps, first, last, run.baseline_psnr));
        }
        let mut w = csv::Writer::from_writer(self.create("synth/summary.csv")?);
        w.write_record(["task", "steps", "psnr_step0", "psnr_final", "psnr_input_copy"])?;
        let f = |v: Option<f64>| v.map(|x| format!("{x:.6}")).unwrap_or_else(|| "NA".into());
        for (name, steps, a, b, c) in summary {
            w.write_record([name, steps.to_string(), f(a), f(b), f(c)])?;
        }
        w.flush()?;
        Ok(())
    }

    fn synthesizers(&self) -> Result<Vec<Synthesizer>> {
        self.cfg
            .synthesis
            .tasks
            .iter()
            .map(|t| Synthesizer::load(self.existing(&format!("synth/{}.safetensors", task_file_stem(t)), Command::SynthTrain)?))
            .collect()
    }

    fn synth_apply(&mut self) -> Result<()> {
        let synths = self.synthesizers()?;
        let mut ds = self.dataset()?;
        let mut rows = Vec::new();
        for (i, case) in ds.cases.iter_mut().enumerate() {
            for m in &self.cfg.synthesis.simulate_missing {
                case.modalities.remove(m);
            }
            *case = synthesize_missing(case, &synths, self.cfg.seed.wrapping_add(i as u64))?;
            for (m, img) in &case.modalities {
                let p = match img.provenance {
                    Provenance::Real => "real",
                    Provenance::Synthesized => "synthesized",
                };
                rows.push([case.id.clone(), m.name().to_string(), p.to_string()]);
            }
        }
        save_dataset(self.cfg.out.join("completed"), &ds)?;
        self.outputs.push("completed/manifest.json".into());
        let mut w = csv::Writer::from_writer(self.create("synth_apply.csv")?);
        w.write_record(["case_id", "modality", "provenance"])?;
        for r in rows {
            w.write_record(&r)?;
        }
        w.flush()?;
        Ok(())
    }

    fn split(&self, cases: &[PreparedCase]) -> (Vec<PreparedCase>, Vec<PreparedCase>) {
        let (tr, te) = split_cases(cases.len(), self.cfg.segmentation.test_fraction, self.cfg.seed);
        (tr.iter().map(|&i| cases[i].clone()).collect(), te.iter().map(|&i| cases[i].clone()).collect())
    }

    fn seg_train(&mut self) -> Result<()> {
        let cases = self.prepared()?;
        let (train, _) = self.split(&cases);
        let s = &self.cfg.segmentation;
        let cv = cross_validate_segmentation(&train, &s.modalities, s.folds, &s.train)?;
        for (i, m) in cv.ensemble.members.iter().enumerate() {
            let bytes = m.to_bytes()?;
            self.write(&format!("seg/fold{}.safetensors", i + 1), bytes)?;
        }
        let rows: Vec<(String, RegionScores)> = cv.fold_scores.iter().enumerate().map(|(i, s)| (format!("fold{}", i + 1), *s)).collect();
        write_metrics_csv(&rows, self.create("seg/cv_metrics.csv")?)?;
        let mut w = csv::Writer::from_writer(self.create("seg/train_loss.csv")?);
        w.write_record(["fold", "step", "loss"])?;
        for (f, losses) in cv.losses.iter().enumerate() {
            for (k, l) in losses.iter().enumerate() {
                w.write_record([(f + 1).to_string(), (k + 1).to_string(), format!("{l:.6}")])?;
            }
        }
        w.flush()?;
        Ok(())
    }

    fn ensemble(&self) -> Result<FoldEnsemble> {
        let mut members = Vec::new();
        for k in 1.. {
            let p = self.cfg.out.join(format!("seg/fold{k}.safetensors"));
            if !p.exists() {
                break;
            }
            members.push(Segmenter::load(p)?);
        }
        if members.is_empty() {
            return Err(data_err("no segmentation models found; run `seg-train` first"));
        }
        FoldEnsemble::new(members)
    }

    fn seg_predict(&mut self) -> Result<()> {
        let ens = self.ensemble()?;
        let cases = self.prepared()?;
        let mut w = csv::Writer::from_writer(self.create("predictions/summary.csv")?);
        w.write_record(["case_id", "wt_voxels", "tc_voxels", "et_voxels"])?;
        for c in &cases {
            let mask = ens.predict_mask(c)?;
            mask.volume().write(self.out(&format!("predictions/{}.raw", c.id))?)?;
            self.outputs.push(format!("predictions/{}.raw", c.id));
            use crate::segmentation::Region;
            w.write_record([
                c.id.clone(),
                mask.count(Region::Wt).to_string(),
                mask.count(Region::Tc).to_string(),
                mask.count(Region::Et).to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    fn seg_eval(&mut self) -> Result<()> {
        let ens = self.ensemble()?;
        let cases = self.prepared()?;
        let (_, test) = self.split(&cases);
        if test.is_empty() {
            return Err(Error::Config("segmentation.test_fraction leaves no test cases".into()));
        }
        let mut rows = Vec::new();
        for c in &test {
            rows.push((c.id.clone(), evaluate_regions(&ens.predict_mask(c)?, &reference_mask(c)?)?));
        }
        let mean = mean_scores(&rows.iter().map(|r| r.1).collect::<Vec<_>>())?;
        rows.push(("mean".into(), mean));
        write_metrics_csv(&rows, self.create("seg_metrics.csv")?)
    }

    fn ablate(&mut self) -> Result<()> {
        let cases = self.prepared()?;
        let (train, test) = self.split(&cases);
        if test.is_empty() {
            return Err(Error::Config("segmentation.test_fraction leaves no test cases".into()));
        }
        let s = &self.cfg.segmentation;
        let res = modality_ablation(&train, &test, &s.ablation, &s.train)?;
        let rows: Vec<(String, RegionScores)> = res.into_iter().map(|(m, sc)| (subset_name(&m), sc)).collect();
        write_metrics_csv(&rows, self.create("ablation.csv")?)
    }

    fn manifest(&self) -> Result<FeatureManifest> {
        match &self.cfg.features.manifest {
            Some(p) => {
                let text = std::fs::read_to_string(p)?;
                serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", p.display())))
            }
            None => Ok(FeatureManifest::default()),
        }
    }

    fn features_extract(&mut self) -> Result<()> {
        let ds = self.dataset()?;
        let manifest = self.manifest()?;
        let mut rows = Vec::new();
        let mut flags = Vec::new();
        for case in &ds.cases {
            let mask = match self.cfg.features.masks {
                config::MaskSource::Reference => case
                    .mask
                    .clone()
                    .ok_or_else(|| data_err(format!("case {} has no reference mask", case.id)))?,
                config::MaskSource::Predicted => {
                    let p = self.existing(&format!("predictions/{}.raw", case.id), Command::SegPredict)?;
                    SegmentationMask::new(Volume::<i16>::read(p)?)?
                }
            };
            let fv = extract_feature_vector(&mask, case.volume(self.cfg.features.reference)?, &manifest)?;
            flags.push((case.id.clone(), fv.missing.iter().map(|&m| if m { 1.0 } else { 0.0 }).collect()));
            rows.push((case.id.clone(), fv.values));
        }
        let names = manifest.names();
        write_features_csv(&names, &rows, self.create("features.csv")?)?;
        write_features_csv(&names, &flags, self.create("features_missing.csv")?)
    }

    fn fused(&self, sources: &[ColumnSource]) -> Result<(FusedFeatureSet, Vec<crate::radiogenomics::SurvivalRecord>)> {
        let ds = self.dataset()?;
        let survival = ds.survival.ok_or_else(|| data_err("dataset has no survival table"))?;
        let radiomic = if sources.contains(&ColumnSource::Radiomic) {
            let p = self.existing("features.csv", Command::FeaturesExtract)?;
            let (names, rows) = read_features_csv(File::open(p)?)?;
            Some(RadiomicTable { names, rows })
        } else {
            None
        };
        let genes = if sources.contains(&ColumnSource::Genomic) {
            Some(ds.genes.ok_or_else(|| data_err("dataset has no gene-expression table"))?)
        } else {
            None
        };
        let with_age = sources.contains(&ColumnSource::Clinical);
        let (set, _) = if radiomic.is_none() && genes.is_none() {
            return Err(Error::Config("survival.sources needs radiomic or genomic".into()));
        } else {
            fuse(radiomic.as_ref(), genes.as_ref(), with_age.then_some(survival.as_slice()))?
        };
        let set = set.with_sources(sources)?;
        Ok((set, survival))
    }

    fn survival_train(&mut self) -> Result<()> {
        let (set, survival) = self.fused(&self.cfg.survival.sources)?;
        let recs = set
            .case_ids
            .iter()
            .map(|id| survival.iter().find(|r| &r.id == id).cloned().ok_or_else(|| data_err(format!("case {id} has no survival record"))))
            .collect::<Result<Vec<_>>>()?;
        let model = train_survival_model(&set.rows, &set.names, &recs, &self.cfg.survival.train)?;
        let saved = SavedSurvivalModel {
            names: set.names.clone(),
            sources: set.sources.clone(),
            model,
        };
        self.write("survival/model.json", serde_json::to_string_pretty(&saved)?)?;
        let mut w = csv::Writer::from_writer(self.create("survival/selected.csv")?);
        w.write_record(["feature", "provenance"])?;
        for &c in &saved.model.selected {
            w.write_record([saved.names[c].as_str(), saved.sources[c].name()])?;
        }
        w.flush()?;
        Ok(())
    }

    fn survival_eval(&mut self) -> Result<()> {
        let (set, survival) = self.fused(&self.cfg.survival.sources)?;
        let st = &self.cfg.survival;
        let evals = st
            .evaluate
            .iter()
            .map(|&k| {
                evaluate_survival(
                    &set,
                    &survival,
                    &SurvivalConfig {
                        model: k,
                        ..st.train.clone()
                    },
                )
            })
            .collect::<Result<Vec<_>>>()?;
        crate::radiogenomics::evaluate::write_survival_metrics(&evals.iter().collect::<Vec<_>>(), self.create("survival_metrics.csv")?)?;
        if st.compare_sources {
            let mut w = csv::Writer::from_writer(self.create("survival_sources.csv")?);
            w.write_record(["sources", "model", "mse", "accuracy"])?;
            let mut variants: Vec<Vec<ColumnSource>> = Vec::new();
            for src in [ColumnSource::Radiomic, ColumnSource::Genomic] {
                if set.count(src) > 0 {
                    variants.push(vec![src]);
                }
            }
            variants.push(st.sources.clone());
            for v in variants {
                let sub = set.with_sources(&v)?;
                let ev = evaluate_survival(&sub, &survival, &st.train)?;
                let avg = ev.average();
                let name = v.iter().map(|s| s.name()).collect::<Vec<_>>().join("+");
                w.write_record([
                    name,
                    st.train.model.name().to_string(),
                    avg.mse.map(|m| format!("{m:.6}")).unwrap_or_else(|| "NA".into()),
                    format!("{:.6}", avg.accuracy),
                ])?;
            }
            w.flush()?;
        }
        Ok(())
    }

    fn explain(&mut self) -> Result<()> {
        let p = self.existing("survival/model.json", Command::SurvivalTrain)?;
        let saved: SavedSurvivalModel = serde_json::from_str(&std::fs::read_to_string(p)?)?;
        let (set, _) = self.fused(&self.cfg.survival.sources)?;
        if set.names != saved.names {
            return Err(data_err("feature columns changed since `survival-train`"));
        }
        let sel = &saved.model.selected;
        let rows: Vec<Vec<f64>> = set.rows.iter().map(|r| sel.iter().map(|&c| r[c]).collect()).collect();
        let mut order: Vec<usize> = (0..rows.len()).collect();
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(self.cfg.seed ^ 0xb6));
        let background: Vec<Vec<f64>> = order.iter().take(self.cfg.explain.background).map(|&i| rows[i].clone()).collect();
        let model = &saved.model;
        let f = |z: &[f64]| model.predict_selected(z);
        let mut attributions = Vec::with_capacity(rows.len());
        let mut w = csv::Writer::from_writer(self.create("shap_values.csv")?);
        let names: Vec<String> = sel.iter().map(|&c| saved.names[c].clone()).collect();
        let mut header = vec!["case_id".to_string(), "base".into()];
        header.extend(names.iter().cloned());
        w.write_record(&header)?;
        for (i, (id, x)) in set.case_ids.iter().zip(&rows).enumerate() {
            let sv = shap_attribution(&f, x, &background, self.cfg.explain.permutations, self.cfg.seed.wrapping_add(i as u64))?;
            let mut rec = vec![id.clone(), format!("{:?}", sv.base)];
            rec.extend(sv.phi.iter().map(|v| format!("{v:?}")));
            w.write_record(&rec)?;
            attributions.push(sv.phi);
        }
        w.flush()?;
        let sources: Vec<ColumnSource> = sel.iter().map(|&c| saved.sources[c]).collect();
        let ranks = rank_features_by_shap(&names, &sources, &attributions)?;
        write_shap_csv(&ranks, None, self.create("shap_ranking.csv")?)
    }

    fn report(&mut self) -> Result<()> {
        let p = self.existing("survival_metrics.csv", Command::SurvivalEval)?;
        let mut rdr = csv::Reader::from_path(p)?;
        let mut w = csv::Writer::from_writer(self.create("report/table2.csv")?);
        w.write_record(["model", "fold", "MSE", "Acc.", "S. sens.", "M. sens.", "L. sens.", "S. spec.", "M. spec.", "L. spec."])?;
        let pct = |s: &str| -> Result<String> {
            if s == "NA" {
                return Ok(s.into());
            }
            let v: f64 = s.parse().map_err(|_| data_err(format!("bad metric `{s}`")))?;
            Ok(format!("{:.2}", 100.0 * v))
        };
        for rec in rdr.records() {
            let rec = rec?;
            let f: Vec<&str> = rec.iter().collect();
            if f.len() != 10 {
                return Err(data_err("survival_metrics.csv has an unexpected layout"));
            }
            let mse = if f[2] == "NA" { "NA".to_string() } else { format!("{:.0}", f[2].parse::<f64>().map_err(|_| data_err("bad MSE"))?) };
            let mut row = vec![f[0].to_string(), f[1].to_string(), mse];
            for v in &f[3..] {
                row.push(pct(v)?);
            }
            w.write_record(&row)?;
        }
        w.flush()?;
        let ranking = self.cfg.out.join("shap_ranking.csv");
        if ranking.exists() {
            let mut rdr = csv::Reader::from_path(ranking)?;
            let mut bars = Vec::new();
            for rec in rdr.records().take(self.cfg.explain.top_k) {
                let rec = rec?;
                let v: f64 = rec.get(1).unwrap_or("0").parse().map_err(|_| data_err("bad SHAP value"))?;
                let colour = match rec.get(2) {
                    Some("radiomic") => "#3b75af",
                    Some("genomic") => "#c8553d",
                    _ => "#6a994e",
                };
                bars.push((rec.get(0).unwrap_or_default().to_string(), v, colour));
            }
            let svg = plot::bar_chart_svg("Mean |SHAP| per feature", "mean |SHAP value| (days)", &bars);
            self.write("report/shap_bar.svg", svg)?;
        }
        Ok(())
    }
}

/// Survival model as written by `survival-train`, with the fused column layout.
#[derive(Clone, Debug, Serialize, serde::Deserialize)]
pub struct SavedSurvivalModel {
    pub names: Vec<String>,
    pub sources: Vec<ColumnSource>,
    pub model: SurvivalModel,
}

/// Tasks whose target is absent from the dataset's cases, for diagnostics.
pub fn missing_modalities(ds: &Dataset) -> Vec<(String, Vec<Modality>)> {
    ds.cases
        .iter()
        .map(|c| (c.id.clone(), Modality::ALL.into_iter().filter(|m| !c.modalities.contains_key(m)).collect::<Vec<_>>()))
        .filter(|(_, m)| !m.is_empty())
        .collect()
}

pub fn output_path(cfg: &PipelineConfig, rel: &str) -> PathBuf {
    Path::new(&cfg.out).join(rel)
}
