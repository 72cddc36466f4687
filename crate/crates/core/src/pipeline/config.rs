//! JSON pipeline configuration. Every section and field is optional; unknown
//! fields are rejected by name.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::case::Modality;
use crate::error::{Error, Result};
use crate::phantom::PhantomSpec;
use crate::radiogenomics::{ColumnSource, SurvivalConfig, SurvivalModelKind};
use crate::segmentation::SegTrainConfig;
use crate::synthesis::{GanTrainConfig, SynthesisTask};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    /// Copied into every stage seed.
    pub seed: u64,
    pub out: PathBuf,
    /// Dataset directory; `<out>/dataset` when unset.
    pub dataset: Option<PathBuf>,
    pub phantom: PhantomStage,
    pub synthesis: SynthesisStage,
    pub segmentation: SegmentationStage,
    pub features: FeatureStage,
    pub survival: SurvivalStage,
    pub explain: ExplainStage,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            out: PathBuf::from("out"),
            dataset: None,
            phantom: PhantomStage::default(),
            synthesis: SynthesisStage::default(),
            segmentation: SegmentationStage::default(),
            features: FeatureStage::default(),
            survival: SurvivalStage::default(),
            explain: ExplainStage::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PhantomStage {
    pub n_cases: usize,
    pub spec: PhantomSpec,
}

impl Default for PhantomStage {
    fn default() -> Self {
        Self {
            n_cases: 16,
            spec: PhantomSpec::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthesisStage {
    pub tasks: Vec<SynthesisTask>,
    pub train: GanTrainConfig,
    /// Share of cases held out for PSNR tracking.
    pub holdout_fraction: f64,
    /// Modalities removed from every case before `synth-apply` fills them back.
    pub simulate_missing: Vec<Modality>,
}

impl Default for SynthesisStage {
    fn default() -> Self {
        Self {
            tasks: vec![SynthesisTask {
                sources: vec![Modality::T1c, Modality::Flair],
                target: Modality::T2,
                noise_channels: 1,
            }],
            train: GanTrainConfig::default(),
            holdout_fraction: 0.25,
            simulate_missing: Vec::new(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SegmentationStage {
    pub modalities: Vec<Modality>,
    pub folds: usize,
    /// Share of cases kept out of training for `seg-eval` and the ablation.
    pub test_fraction: f64,
    pub train: SegTrainConfig,
    pub ablation: Vec<Vec<Modality>>,
}

impl Default for SegmentationStage {
    fn default() -> Self {
        Self {
            modalities: Modality::ALL.to_vec(),
            folds: 2,
            test_fraction: 0.25,
            train: SegTrainConfig::default(),
            ablation: vec![
                vec![Modality::T1c],
                vec![Modality::T1c, Modality::Flair],
                Modality::ALL.to_vec(),
            ],
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MaskSource {
    /// Ground-truth masks stored with the dataset.
    Reference,
    /// Masks written by `seg-predict`.
    Predicted,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FeatureStage {
    /// JSON feature manifest; the 71-entry default when unset.
    pub manifest: Option<PathBuf>,
    /// Volume that supplies intensities.
    pub reference: Modality,
    pub masks: MaskSource,
}

impl Default for FeatureStage {
    fn default() -> Self {
        Self {
            manifest: None,
            reference: Modality::T1c,
            masks: MaskSource::Reference,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SurvivalStage {
    pub sources: Vec<ColumnSource>,
    /// Model fitted by `survival-train`; its thresholds also band the dataset.
    pub train: SurvivalConfig,
    /// Models compared by `survival-eval`.
    pub evaluate: Vec<SurvivalModelKind>,
    /// Also score radiomic-only and genomic-only inputs.
    pub compare_sources: bool,
}

impl Default for SurvivalStage {
    fn default() -> Self {
        Self {
            sources: vec![ColumnSource::Radiomic, ColumnSource::Genomic],
            train: SurvivalConfig::default(),
            evaluate: vec![SurvivalModelKind::Svr, SurvivalModelKind::Svc, SurvivalModelKind::Ann],
            compare_sources: true,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExplainStage {
    /// Background rows drawn from the cohort.
    pub background: usize,
    pub permutations: usize,
    pub top_k: usize,
}

impl Default for ExplainStage {
    fn default() -> Self {
        Self {
            background: 20,
            permutations: crate::radiogenomics::shap::DEFAULT_PERMUTATIONS,
            top_k: 20,
        }
    }
}

impl PipelineConfig {
    /// Parses a config file; syntax and schema problems are config errors.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_json(&text).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    /// Applies the seed everywhere and checks cross-field constraints.
    pub fn finalize(mut self) -> Result<Self> {
        let s = self.seed;
        self.phantom.spec.seed = s;
        self.synthesis.train.seed = s;
        self.segmentation.train.seed = s;
        self.survival.train.seed = s;
        self.survival.train.ann.seed = s;
        self.phantom.spec.thresholds = self.survival.train.thresholds;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        let frac = |name: &str, v: f64| {
            if (0.0..1.0).contains(&v) {
                Ok(())
            } else {
                Err(Error::Config(format!("{name} must be in [0, 1), got {v}")))
            }
        };
        frac("synthesis.holdout_fraction", self.synthesis.holdout_fraction)?;
        frac("segmentation.test_fraction", self.segmentation.test_fraction)?;
        self.phantom.spec.validate()?;
        self.synthesis.train.validate()?;
        self.survival.train.thresholds.validate()?;
        for t in &self.synthesis.tasks {
            t.validate().map_err(|e| Error::Config(format!("synthesis.tasks: {e}")))?;
        }
        if self.segmentation.modalities.is_empty() {
            return Err(Error::Config("segmentation.modalities must not be empty".into()));
        }
        if self.segmentation.folds < 2 {
            return Err(Error::Config(format!("segmentation.folds must be ≥ 2, got {}", self.segmentation.folds)));
        }
        if self.survival.sources.is_empty() {
            return Err(Error::Config("survival.sources must not be empty".into()));
        }
        if self.explain.background == 0 || self.explain.permutations == 0 {
            return Err(Error::Config("explain.background and explain.permutations must be positive".into()));
        }
        if let Some(m) = &self.features.manifest {
            if !m.exists() {
                return Err(Error::Config(format!("features.manifest {} does not exist", m.display())));
            }
        }
        Ok(())
    }

    pub fn dataset_root(&self) -> PathBuf {
        self.dataset.clone().unwrap_or_else(|| self.out.join("dataset"))
    }

    /// SHA-256 of the effective configuration's canonical JSON.
    pub fn hash(&self) -> Result<String> {
        let bytes = serde_json::to_vec(self)?;
        Ok(Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect())
    }
}
