//! Radiomic features of a segmented tumor: principal-axis geometry, box-counting
//! fractal dimension and first-order intensity statistics, laid out by a
//! replaceable manifest.

pub mod fractal;
pub mod geometry;
pub mod intensity;

use std::collections::BTreeMap;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{data_err, Error, Result};
use crate::segmentation::{Region, SegmentationMask};
use crate::volume::Volume;

pub use fractal::{box_count_dimension, FractalResult};
pub use geometry::{eccentricities, region_geometry, RegionGeometry};
pub use intensity::{intensity_stats, IntensityStats};

/// Value written for a feature whose region is empty or whose statistic is undefined.
pub const FILL_VALUE: f64 = 0.0;

const AXES: [char; 3] = ['x', 'y', 'z'];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FeatureSpec {
    AxisLength { region: Region, axis: usize },
    AxisDirection { region: Region, axis: usize, component: usize },
    Centroid { region: Region, component: usize },
    Eigenvalue { region: Region, axis: usize },
    MeridionalEccentricity { region: Region },
    EquatorialEccentricity { region: Region },
    FractalDimension { region: Region },
    Kurtosis { region: Region },
    Entropy { region: Region },
    Energy { region: Region },
}

impl FeatureSpec {
    pub fn region(&self) -> Region {
        match *self {
            FeatureSpec::AxisLength { region, .. }
            | FeatureSpec::AxisDirection { region, .. }
            | FeatureSpec::Centroid { region, .. }
            | FeatureSpec::Eigenvalue { region, .. }
            | FeatureSpec::MeridionalEccentricity { region }
            | FeatureSpec::EquatorialEccentricity { region }
            | FeatureSpec::FractalDimension { region }
            | FeatureSpec::Kurtosis { region }
            | FeatureSpec::Entropy { region }
            | FeatureSpec::Energy { region } => region,
        }
    }

    pub fn name(&self) -> String {
        let r = self.region().name().to_lowercase();
        match *self {
            FeatureSpec::AxisLength { axis, .. } => format!("{r}_axis{}_length", axis + 1),
            FeatureSpec::AxisDirection { axis, component, .. } => format!("{r}_axis{}_dir_{}", axis + 1, AXES[component]),
            FeatureSpec::Centroid { component, .. } => format!("{r}_centroid_{}", AXES[component]),
            FeatureSpec::Eigenvalue { axis, .. } => format!("{r}_eigenvalue{}", axis + 1),
            FeatureSpec::MeridionalEccentricity { .. } => format!("{r}_meridional_ecc"),
            FeatureSpec::EquatorialEccentricity { .. } => format!("{r}_equatorial_ecc"),
            FeatureSpec::FractalDimension { .. } => format!("{r}_fractal_dim"),
            FeatureSpec::Kurtosis { .. } => format!("{r}_kurtosis"),
            FeatureSpec::Entropy { .. } => format!("{r}_entropy"),
            FeatureSpec::Energy { .. } => format!("{r}_energy"),
        }
    }

    fn validate(&self) -> Result<()> {
        let ok = match *self {
            FeatureSpec::AxisLength { axis, .. } | FeatureSpec::Eigenvalue { axis, .. } => axis < 3,
            FeatureSpec::AxisDirection { axis, component, .. } => axis < 3 && component < 3,
            FeatureSpec::Centroid { component, .. } => component < 3,
            _ => true,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("feature {self:?} indexes past 3 axes")))
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureManifest {
    pub features: Vec<FeatureSpec>,
    #[serde(default = "default_bins")]
    pub histogram_bins: usize,
    #[serde(default = "default_scales")]
    pub box_scales: Vec<usize>,
}

fn default_bins() -> usize {
    intensity::DEFAULT_BINS
}

fn default_scales() -> Vec<usize> {
    fractal::DEFAULT_SCALES.to_vec()
}

impl Default for FeatureManifest {
    /// 20 geometric entries for each of NCR, TC and WT, fractal dimension of ET
    /// and NCR, then kurtosis, entropy and energy for NCR, TC and WT: 71 in all.
    fn default() -> Self {
        let regions = [Region::Ncr, Region::Tc, Region::Wt];
        let mut f = Vec::with_capacity(71);
        for region in regions {
            f.extend((0..3).map(|axis| FeatureSpec::AxisLength { region, axis }));
            for axis in 0..3 {
                f.extend((0..3).map(|component| FeatureSpec::AxisDirection { region, axis, component }));
            }
            f.extend((0..3).map(|component| FeatureSpec::Centroid { region, component }));
            f.extend((0..3).map(|axis| FeatureSpec::Eigenvalue { region, axis }));
            f.push(FeatureSpec::MeridionalEccentricity { region });
            f.push(FeatureSpec::EquatorialEccentricity { region });
        }
        f.push(FeatureSpec::FractalDimension { region: Region::Et });
        f.push(FeatureSpec::FractalDimension { region: Region::Ncr });
        f.extend(regions.map(|region| FeatureSpec::Kurtosis { region }));
        f.extend(regions.map(|region| FeatureSpec::Entropy { region }));
        f.extend(regions.map(|region| FeatureSpec::Energy { region }));
        Self {
            features: f,
            histogram_bins: default_bins(),
            box_scales: default_scales(),
        }
    }
}

impl FeatureManifest {
    pub fn names(&self) -> Vec<String> {
        self.features.iter().map(FeatureSpec::name).collect()
    }

    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }

    pub fn validate(&self) -> Result<()> {
        if self.histogram_bins == 0 {
            return Err(Error::Config("histogram_bins must be ≥ 1".into()));
        }
        if self.box_scales.len() < 3 || self.box_scales.contains(&0) {
            return Err(Error::Config("box_scales needs ≥3 sizes, each ≥ 1".into()));
        }
        self.features.iter().try_for_each(FeatureSpec::validate)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RadiomicFeatureVector {
    pub names: Vec<String>,
    pub values: Vec<f64>,
    /// True where the value is [`FILL_VALUE`] because the region was empty or
    /// the statistic undefined.
    pub missing: Vec<bool>,
}

#[derive(Default)]
struct RegionCache {
    geometry: BTreeMap<Region, Option<RegionGeometry>>,
    fractal: BTreeMap<Region, Option<f64>>,
    intensity: BTreeMap<Region, Option<IntensityStats>>,
}

/// Evaluates `manifest` on `mask`, taking intensities from `reference`.
pub fn extract_feature_vector(
    mask: &SegmentationMask,
    reference: &Volume<f32>,
    manifest: &FeatureManifest,
) -> Result<RadiomicFeatureVector> {
    manifest.validate()?;
    if mask.dims() != reference.dims() {
        return Err(data_err(format!(
            "mask grid {:?} differs from reference volume {:?}",
            mask.dims(),
            reference.dims()
        )));
    }
    let dims = mask.dims();
    let spacing = mask.spacing();
    let mut cache = RegionCache::default();
    let mut values = Vec::with_capacity(manifest.len());
    let mut missing = Vec::with_capacity(manifest.len());
    let mut regions: BTreeMap<Region, Vec<bool>> = BTreeMap::new();
    for spec in &manifest.features {
        let r = spec.region();
        let region = regions.entry(r).or_insert_with(|| mask.region(r));
        let v: Option<f64> = match *spec {
            FeatureSpec::FractalDimension { .. } => {
                if let std::collections::btree_map::Entry::Vacant(e) = cache.fractal.entry(r) {
                    e.insert(empty_to_none(box_count_dimension(region, dims, &manifest.box_scales))?.map(|f| f.dimension));
                }
                cache.fractal[&r]
            }
            FeatureSpec::Kurtosis { .. } | FeatureSpec::Entropy { .. } | FeatureSpec::Energy { .. } => {
                if !cache.intensity.contains_key(&r) {
                    let samples: Vec<f64> = region
                        .iter()
                        .zip(reference.data())
                        .filter(|(&m, _)| m)
                        .map(|(_, &v)| f64::from(v))
                        .collect();
                    let st = if samples.is_empty() { None } else { Some(intensity_stats(&samples, manifest.histogram_bins)?) };
                    cache.intensity.insert(r, st);
                }
                cache.intensity[&r].as_ref().and_then(|st| match spec {
                    FeatureSpec::Kurtosis { .. } => st.kurtosis,
                    FeatureSpec::Entropy { .. } => Some(st.entropy),
                    _ => Some(st.energy()),
                })
            }
            _ => {
                if !cache.geometry.contains_key(&r) {
                    cache.geometry.insert(r, empty_to_none(region_geometry(region, dims, spacing))?);
                }
                cache.geometry[&r].as_ref().map(|g| geometric_value(spec, g))
            }
        };
        values.push(v.unwrap_or(FILL_VALUE));
        missing.push(v.is_none());
    }
    Ok(RadiomicFeatureVector {
        names: manifest.names(),
        values,
        missing,
    })
}

fn empty_to_none<T>(r: Result<T>) -> Result<Option<T>> {
    match r {
        Ok(v) => Ok(Some(v)),
        Err(Error::EmptyRegion(_)) => Ok(None),
        Err(e) => Err(e),
    }
}

fn geometric_value(spec: &FeatureSpec, g: &RegionGeometry) -> f64 {
    match *spec {
        FeatureSpec::AxisLength { axis, .. } => g.axis_lengths[axis],
        FeatureSpec::AxisDirection { axis, component, .. } => g.axis_directions[axis][component],
        FeatureSpec::Centroid { component, .. } => g.centroid[component],
        FeatureSpec::Eigenvalue { axis, .. } => g.eigenvalues[axis],
        FeatureSpec::MeridionalEccentricity { .. } => g.meridional_eccentricity,
        FeatureSpec::EquatorialEccentricity { .. } => g.equatorial_eccentricity,
        _ => unreachable!("not a geometric feature"),
    }
}

/// One row per case: `case_id` then the manifest columns.
pub fn write_features_csv(names: &[String], rows: &[(String, Vec<f64>)], w: impl Write) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    let mut header = vec!["case_id".to_string()];
    header.extend(names.iter().cloned());
    wtr.write_record(&header)?;
    for (id, vals) in rows {
        if vals.len() != names.len() {
            return Err(data_err(format!("case {id} has {} features, header has {}", vals.len(), names.len())));
        }
        let mut rec = vec![id.clone()];
        rec.extend(vals.iter().map(|v| format!("{v:?}")));
        wtr.write_record(&rec)?;
    }
    wtr.flush()?;
    Ok(())
}

/// Feature table read back from [`write_features_csv`]: names and `(case_id, values)` rows.
pub type FeatureTable = (Vec<String>, Vec<(String, Vec<f64>)>);

pub fn read_features_csv(r: impl Read) -> Result<FeatureTable> {
    let mut rdr = csv::Reader::from_reader(r);
    let header = rdr.headers()?.clone();
    if header.get(0) != Some("case_id") {
        return Err(data_err("feature table must start with a case_id column"));
    }
    let names: Vec<String> = header.iter().skip(1).map(String::from).collect();
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let id = rec.get(0).unwrap_or_default().to_string();
        let vals = rec
            .iter()
            .skip(1)
            .map(|s| s.trim().parse::<f64>().map_err(|_| data_err(format!("case {id}: bad feature value `{s}`"))))
            .collect::<Result<Vec<_>>>()?;
        rows.push((id, vals));
    }
    Ok((names, rows))
}
