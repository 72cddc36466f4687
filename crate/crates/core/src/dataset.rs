//! Dataset directories: a JSON manifest of cases with relative volume paths
//! and provenance flags, plus optional gene and survival tables.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::case::{CaseRecord, Modality, Provenance};
use crate::error::{data_err, Result};
use crate::radiogenomics::genes::{load_gene_expression, write_gene_expression, GeneExpressionMatrix};
use crate::radiogenomics::survival::{load_survival, write_survival, SurvivalRecord, Thresholds};
use crate::segmentation::SegmentationMask;
use crate::volume::Volume;

pub const MANIFEST_FILE: &str = "manifest.json";
pub const GENES_FILE: &str = "genes.csv";
pub const SURVIVAL_FILE: &str = "survival.csv";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModalityEntry {
    pub path: String,
    pub provenance: Provenance,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CaseEntry {
    pub id: String,
    pub modalities: BTreeMap<Modality, ModalityEntry>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mask: Option<String>,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Dataset {
    pub cases: Vec<CaseRecord>,
    pub genes: Option<GeneExpressionMatrix>,
    pub survival: Option<Vec<SurvivalRecord>>,
}

impl Dataset {
    pub fn case(&self, id: &str) -> Option<&CaseRecord> {
        self.cases.iter().find(|c| c.id == id)
    }
}

fn rel(case: &str, file: &str) -> String {
    format!("cases/{case}/{file}.raw")
}

pub fn write_case(root: &Path, case: &CaseRecord) -> Result<CaseEntry> {
    let mut modalities = BTreeMap::new();
    for (m, img) in &case.modalities {
        let path = rel(&case.id, m.name());
        img.volume.write(root.join(&path))?;
        modalities.insert(
            *m,
            ModalityEntry {
                path,
                provenance: img.provenance,
            },
        );
    }
    let mask = match &case.mask {
        Some(mask) => {
            let path = rel(&case.id, "mask");
            mask.volume().write(root.join(&path))?;
            Some(path)
        }
        None => None,
    };
    Ok(CaseEntry {
        id: case.id.clone(),
        modalities,
        mask,
    })
}

pub fn read_case(root: &Path, entry: &CaseEntry) -> Result<CaseRecord> {
    let mut case = CaseRecord::new(&entry.id);
    for (m, e) in &entry.modalities {
        case.insert(*m, Volume::<f32>::read(root.join(&e.path))?, e.provenance)?;
    }
    if let Some(p) = &entry.mask {
        case.mask = Some(SegmentationMask::new(Volume::<i16>::read(root.join(p))?)?);
    }
    case.validate()?;
    Ok(case)
}

pub fn save_dataset(root: impl AsRef<Path>, ds: &Dataset) -> Result<()> {
    let root = root.as_ref();
    std::fs::create_dir_all(root)?;
    let entries = ds.cases.iter().map(|c| write_case(root, c)).collect::<Result<Vec<_>>>()?;
    std::fs::write(root.join(MANIFEST_FILE), serde_json::to_string_pretty(&entries)?)?;
    if let Some(g) = &ds.genes {
        write_gene_expression(g, root.join(GENES_FILE))?;
    }
    if let Some(s) = &ds.survival {
        write_survival(s, std::fs::File::create(root.join(SURVIVAL_FILE))?)?;
    }
    Ok(())
}

pub fn read_manifest(root: impl AsRef<Path>) -> Result<Vec<CaseEntry>> {
    let path: PathBuf = root.as_ref().join(MANIFEST_FILE);
    let text = std::fs::read_to_string(&path).map_err(|e| data_err(format!("{}: {e}", path.display())))?;
    Ok(serde_json::from_str(&text)?)
}

pub fn load_dataset(root: impl AsRef<Path>, thresholds: &Thresholds) -> Result<Dataset> {
    let root = root.as_ref();
    let entries = read_manifest(root)?;
    let cases = entries.iter().map(|e| read_case(root, e)).collect::<Result<Vec<_>>>()?;
    let genes_path = root.join(GENES_FILE);
    let genes = genes_path.exists().then(|| load_gene_expression(&genes_path)).transpose()?;
    let surv_path = root.join(SURVIVAL_FILE);
    let survival = surv_path.exists().then(|| load_survival(&surv_path, thresholds)).transpose()?;
    Ok(Dataset { cases, genes, survival })
}
