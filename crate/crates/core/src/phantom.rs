//! Procedural tumor phantoms with known labels, three MRI contrasts, a gene
//! table and survival planted on tumor size, necrosis roughness and a few genes.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::case::{CaseRecord, Modality, Provenance};
use crate::error::{Error, Result};
use crate::radiogenomics::genes::GeneExpressionMatrix;
use crate::radiogenomics::survival::{SurvivalRecord, Thresholds};
use crate::segmentation::mask::{SegmentationMask, EDEMA_LABEL, ET_LABEL, NCR_LABEL};
use crate::segmentation::Region;
use crate::volume::Volume;

/// Per-contrast intensity of each tissue class before blur and noise.
/// Healthy tissue is `healthy_base + healthy_texture·t` where `t ∈ [0,1]` is a
/// smooth anatomy field shared by all contrasts.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TissueContrast {
    pub healthy_base: f64,
    pub healthy_texture: f64,
    /// Added to the healthy value inside edema.
    pub edema_shift: f64,
    /// Absolute edema level, used instead of the shift when set.
    pub edema: Option<f64>,
    pub enhancing: f64,
    pub necrosis: f64,
    pub noise_sd: f64,
}

impl TissueContrast {
    fn value(&self, label: i16, texture: f64) -> f64 {
        let healthy = self.healthy_base + self.healthy_texture * texture;
        match label {
            EDEMA_LABEL => self.edema.unwrap_or(healthy + self.edema_shift),
            ET_LABEL => self.enhancing,
            NCR_LABEL => self.necrosis,
            _ => healthy,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SurvivalEffects {
    pub base_days: f64,
    /// Days per unit of the size factor (factor spans [-1, 1]).
    pub size: f64,
    /// Days per unit of the necrosis-roughness factor (spans [-1, 1]).
    pub roughness: f64,
    /// Days per standard deviation of each planted gene.
    pub genes: Vec<f64>,
    pub noise_sd: f64,
}

impl Default for SurvivalEffects {
    fn default() -> Self {
        Self {
            base_days: 420.0,
            size: -150.0,
            roughness: -150.0,
            genes: vec![70.0, -70.0, 70.0],
            noise_sd: 35.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PhantomSpec {
    pub grid: [usize; 3],
    pub spacing_mm: [f64; 3],
    /// Whole-tumor semi-axis range as a fraction of the smallest grid dim.
    pub wt_radius: (f64, f64),
    /// Core semi-axes as a fraction of the whole-tumor semi-axes.
    pub tc_fraction: (f64, f64),
    /// Necrosis radius as a fraction of the core radius.
    pub ncr_fraction: (f64, f64),
    /// Range of the necrosis boundary roughness, 0 = smooth.
    pub roughness: (f64, f64),
    /// Amplitude of the low-order whole-tumor boundary modulation.
    pub lobulation: f64,
    pub t1c: TissueContrast,
    pub flair: TissueContrast,
    pub t2: TissueContrast,
    pub n_genes: usize,
    pub survival: SurvivalEffects,
    pub thresholds: Thresholds,
    pub seed: u64,
}

impl Default for PhantomSpec {
    fn default() -> Self {
        Self {
            grid: [32, 32, 32],
            spacing_mm: [1.0; 3],
            wt_radius: (0.16, 0.28),
            tc_fraction: (0.55, 0.75),
            ncr_fraction: (0.5, 0.75),
            roughness: (0.0, 1.0),
            lobulation: 0.15,
            // edema is invisible on the contrast-enhanced scan
            t1c: TissueContrast {
                healthy_base: 0.45,
                healthy_texture: 0.25,
                edema_shift: -0.03,
                edema: None,
                enhancing: 1.0,
                necrosis: 0.15,
                noise_sd: 0.04,
            },
            flair: TissueContrast {
                healthy_base: 0.35,
                healthy_texture: 0.15,
                edema_shift: 0.0,
                edema: Some(0.68),
                enhancing: 0.72,
                necrosis: 0.55,
                noise_sd: 0.07,
            },
            // texture inverted relative to T1c, fluid-bright necrosis
            t2: TissueContrast {
                healthy_base: 0.6,
                healthy_texture: -0.35,
                edema_shift: 0.0,
                edema: Some(0.85),
                enhancing: 0.62,
                necrosis: 0.95,
                noise_sd: 0.06,
            },
            n_genes: 60,
            survival: SurvivalEffects::default(),
            thresholds: Thresholds::default(),
            seed: 0,
        }
    }
}

fn check_range(name: &str, r: (f64, f64), lo: f64, hi: f64) -> Result<()> {
    if !(r.0 <= r.1 && r.0 >= lo && r.1 <= hi) {
        return Err(Error::Config(format!("phantom {name} range {r:?} must lie within [{lo}, {hi}] and be ordered")));
    }
    Ok(())
}

impl PhantomSpec {
    pub fn contrast(&self, m: Modality) -> &TissueContrast {
        match m {
            Modality::T1c => &self.t1c,
            Modality::Flair => &self.flair,
            Modality::T2 => &self.t2,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.grid.iter().any(|&d| d < 8) {
            return Err(Error::Config(format!("phantom grid {:?} too small (min 8 per axis)", self.grid)));
        }
        if self.spacing_mm.iter().any(|&s| s <= 0.0) {
            return Err(Error::Config("phantom spacing must be positive".into()));
        }
        check_range("wt_radius", self.wt_radius, 0.02, 0.4)?;
        // sub-regions must stay strictly inside their parents
        if self.tc_fraction.1 >= 1.0 || self.ncr_fraction.1 >= 1.0 {
            return Err(Error::Config(
                "phantom sub-regions must be nested: tc_fraction and ncr_fraction must be below 1".into(),
            ));
        }
        check_range("tc_fraction", self.tc_fraction, 0.05, 1.0)?;
        check_range("ncr_fraction", self.ncr_fraction, 0.0, 1.0)?;
        check_range("roughness", self.roughness, 0.0, 1.0)?;
        if self.survival.genes.len() > self.n_genes {
            return Err(Error::Config(format!(
                "{} planted genes but only {} gene columns",
                self.survival.genes.len(),
                self.n_genes
            )));
        }
        self.thresholds.validate()
    }
}

/// Ground-truth generative factors of one phantom case.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlantedFactors {
    pub id: String,
    /// Whole-tumor size draw mapped to [-1, 1].
    pub size_factor: f64,
    /// Necrosis roughness draw mapped to [-1, 1].
    pub roughness_factor: f64,
    pub planted_genes: Vec<f64>,
    pub wt_voxels: usize,
}

impl PlantedFactors {
    /// Factors in the order they enter the survival model.
    pub fn as_vector(&self) -> Vec<f64> {
        let mut v = vec![self.size_factor, self.roughness_factor];
        v.extend(&self.planted_genes);
        v
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PhantomDataset {
    pub spec: PhantomSpec,
    pub cases: Vec<CaseRecord>,
    pub genes: GeneExpressionMatrix,
    pub survival: Vec<SurvivalRecord>,
    pub truth: Vec<PlantedFactors>,
    /// Gene columns carrying survival signal.
    pub planted_gene_columns: Vec<usize>,
}

pub fn case_id(i: usize) -> String {
    format!("case{i:03}")
}

fn unit(r: (f64, f64), t: f64) -> f64 {
    r.0 + (r.1 - r.0) * t
}

fn to_factor(t: f64) -> f64 {
    2.0 * t - 1.0
}

struct Wave {
    k: [f64; 3],
    phase: f64,
    amp: f64,
}

fn anatomy_waves(rng: &mut ChaCha8Rng, dims: [usize; 3]) -> Vec<Wave> {
    let scale = *dims.iter().min().unwrap() as f64;
    (0..4)
        .map(|_| {
            let dir: [f64; 3] = std::array::from_fn(|_| StandardNormal.sample(rng));
            let norm = dir.iter().map(|d| d * d).sum::<f64>().sqrt().max(1e-9);
            let freq = std::f64::consts::TAU * rng.random_range(1.0..3.0) / scale;
            Wave {
                k: dir.map(|d| d / norm * freq),
                phase: rng.random_range(0.0..std::f64::consts::TAU),
                amp: rng.random_range(0.5..1.0),
            }
        })
        .collect()
}

fn texture_at(waves: &[Wave], p: [f64; 3]) -> f64 {
    let total: f64 = waves.iter().map(|w| w.amp).sum();
    let s: f64 = waves
        .iter()
        .map(|w| w.amp * (w.k[0] * p[0] + w.k[1] * p[1] + w.k[2] * p[2] + w.phase).sin())
        .sum();
    0.5 + 0.5 * s / total
}

/// Separable [1, 2, 1]/4 smoothing with edge clamping.
fn blur(data: &mut [f64], dims: [usize; 3]) {
    let [_, ny, nz] = dims;
    let strides = [ny * nz, nz, 1];
    let mut tmp = vec![0.0; data.len()];
    for axis in 0..3 {
        let n = dims[axis];
        let st = strides[axis];
        for i in 0..data.len() {
            let c = [i / (ny * nz), (i / nz) % ny, i % nz][axis];
            let prev = if c > 0 { data[i - st] } else { data[i] };
            let next = if c + 1 < n { data[i + st] } else { data[i] };
            tmp[i] = 0.25 * prev + 0.5 * data[i] + 0.25 * next;
        }
        data.copy_from_slice(&tmp);
    }
}

fn generate_case(spec: &PhantomSpec, index: usize, rng: &mut ChaCha8Rng) -> Result<(CaseRecord, PlantedFactors)> {
    let dims = spec.grid;
    let dimf = dims.map(|d| d as f64);
    let min_dim = dimf.iter().cloned().fold(f64::INFINITY, f64::min);
    let center = dimf.map(|d| (d - 1.0) / 2.0);
    let brain_axes = dimf.map(|d| 0.46 * d);

    let size_t: f64 = rng.random();
    let rough_t: f64 = rng.random();
    let wt_mean = unit(spec.wt_radius, size_t) * min_dim;
    let wt_axes: [f64; 3] = std::array::from_fn(|_| wt_mean * rng.random_range(0.8..1.2));
    let wt_center: [f64; 3] = std::array::from_fn(|a| center[a] + rng.random_range(-0.1..0.1) * dimf[a]);
    let tc_frac = unit(spec.tc_fraction, rng.random());
    let tc_axes = wt_axes.map(|r| r * tc_frac);
    let tc_center: [f64; 3] =
        std::array::from_fn(|a| wt_center[a] + rng.random_range(-0.5..0.5) * (1.0 - tc_frac) * wt_axes[a]);
    let ncr_frac = unit(spec.ncr_fraction, rng.random());
    let roughness = unit(spec.roughness, rough_t);
    let lobe_phase: [f64; 2] = std::array::from_fn(|_| rng.random_range(0.0..std::f64::consts::TAU));
    let waves = anatomy_waves(rng, dims);

    let n: usize = dims.iter().product();
    let mut labels = vec![0i16; n];
    let mut brain = vec![false; n];
    let mut texture = vec![0.0; n];
    let mut i = 0;
    for x in 0..dims[0] {
        for y in 0..dims[1] {
            for z in 0..dims[2] {
                let p = [x as f64, y as f64, z as f64];
                let rb: f64 = (0..3).map(|a| ((p[a] - center[a]) / brain_axes[a]).powi(2)).sum();
                brain[i] = rb <= 1.0;
                texture[i] = texture_at(&waves, p);
                if brain[i] {
                    let d: [f64; 3] = std::array::from_fn(|a| p[a] - wt_center[a]);
                    let rw = (0..3).map(|a| (d[a] / wt_axes[a]).powi(2)).sum::<f64>().sqrt();
                    let norm = d.iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-9);
                    let theta = d[1].atan2(d[0]);
                    let phi = (d[2] / norm).acos();
                    let lobe = 1.0 + spec.lobulation * (3.0 * theta + lobe_phase[0]).sin() * (2.0 * phi + lobe_phase[1]).cos();
                    // per-voxel draw keeps the stream aligned regardless of region
                    let speckle: f64 = rng.random();
                    if rw <= lobe {
                        let rt = (0..3).map(|a| ((p[a] - tc_center[a]) / tc_axes[a]).powi(2)).sum::<f64>().sqrt();
                        labels[i] = if rt <= 1.0 {
                            let edge = ncr_frac + 0.6 * roughness * (speckle - 0.5);
                            if rt < edge {
                                NCR_LABEL
                            } else {
                                ET_LABEL
                            }
                        } else {
                            EDEMA_LABEL
                        };
                    }
                } else {
                    let _: f64 = rng.random();
                }
                i += 1;
            }
        }
    }
    let mask_vol = Volume::new(dims, spec.spacing_mm, [0.0; 3], labels.clone())?;
    let mask = SegmentationMask::new(mask_vol)?;
    check_nesting(&mask)?;

    let mut case = CaseRecord::new(case_id(index));
    for m in Modality::ALL {
        let c = spec.contrast(m);
        let mut vals: Vec<f64> = labels.iter().zip(&texture).map(|(&l, &t)| c.value(l, t)).collect();
        blur(&mut vals, dims);
        let noise = Normal::new(0.0, c.noise_sd.max(0.0)).map_err(|e| Error::Config(e.to_string()))?;
        let data: Vec<f32> = vals
            .iter()
            .zip(&brain)
            .map(|(&v, &b)| {
                let e = noise.sample(rng);
                if b {
                    (v + e).max(0.01) as f32
                } else {
                    0.0
                }
            })
            .collect();
        case.insert(m, Volume::new(dims, spec.spacing_mm, [0.0; 3], data)?, Provenance::Real)?;
    }
    let wt_voxels = mask.count(Region::Wt);
    case.mask = Some(mask);
    let factors = PlantedFactors {
        id: case.id.clone(),
        size_factor: to_factor(size_t),
        roughness_factor: to_factor(rough_t),
        planted_genes: Vec::new(),
        wt_voxels,
    };
    Ok((case, factors))
}

/// ET ⊆ TC ⊆ WT.
pub fn check_nesting(mask: &SegmentationMask) -> Result<()> {
    let et = mask.region(Region::Et);
    let tc = mask.region(Region::Tc);
    let wt = mask.region(Region::Wt);
    let ok = et.iter().zip(&tc).zip(&wt).all(|((&e, &t), &w)| (!e || t) && (!t || w));
    if ok {
        Ok(())
    } else {
        Err(Error::Data("mask regions are not nested".into()))
    }
}

pub fn generate_phantom_dataset(spec: &PhantomSpec, n_cases: usize) -> Result<PhantomDataset> {
    spec.validate()?;
    if n_cases == 0 {
        return Err(Error::Config("phantom dataset needs at least one case".into()));
    }
    let mut cases = Vec::with_capacity(n_cases);
    let mut truth = Vec::with_capacity(n_cases);
    for i in 0..n_cases {
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
        rng.set_stream(i as u64 + 1);
        let (case, f) = generate_case(spec, i, &mut rng)?;
        cases.push(case);
        truth.push(f);
    }

    // cohort-level stream: gene table, planted columns, ages, survival noise
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    rng.set_stream(0);
    let n_genes = spec.n_genes;
    let mut columns: Vec<usize> = (0..n_genes).collect();
    for k in 0..spec.survival.genes.len() {
        let j = rng.random_range(k..n_genes);
        columns.swap(k, j);
    }
    let planted: Vec<usize> = columns[..spec.survival.genes.len()].to_vec();
    let values: Vec<f64> = (0..n_cases * n_genes).map(|_| StandardNormal.sample(&mut rng)).collect();
    let genes = GeneExpressionMatrix::new(
        cases.iter().map(|c| c.id.clone()).collect(),
        (0..n_genes).map(|j| format!("GENE{j:04}")).collect(),
        values,
    )?;
    let eff = &spec.survival;
    let noise = Normal::new(0.0, eff.noise_sd.max(0.0)).map_err(|e| Error::Config(e.to_string()))?;
    let mut survival = Vec::with_capacity(n_cases);
    for (i, f) in truth.iter_mut().enumerate() {
        f.planted_genes = planted.iter().map(|&j| genes.value(i, j)).collect();
        let gene_term: f64 = f.planted_genes.iter().zip(&eff.genes).map(|(g, b)| g * b).sum();
        let age = rng.random_range(35.0..80.0_f64).round();
        let days = eff.base_days + eff.size * f.size_factor + eff.roughness * f.roughness_factor + gene_term + noise.sample(&mut rng);
        let days = days.round().clamp(30.0, 5000.0) as u32;
        survival.push(SurvivalRecord::new(&f.id, days, Some(age), &spec.thresholds)?);
    }
    Ok(PhantomDataset {
        spec: spec.clone(),
        cases,
        genes,
        survival,
        truth,
        planted_gene_columns: planted,
    })
}
