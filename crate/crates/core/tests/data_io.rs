use gbm_radiogenomics::case::{CaseRecord, Provenance};
use gbm_radiogenomics::dataset::{load_dataset, read_manifest, save_dataset, Dataset};
use gbm_radiogenomics::normalize::{normalize_intensity, nonzero_support};
use gbm_radiogenomics::phantom::{check_nesting, generate_phantom_dataset, PhantomSpec};
use gbm_radiogenomics::radiogenomics::svm::{Kernel, SvmParams, Svr};
use gbm_radiogenomics::radiogenomics::Standardizer;
use gbm_radiogenomics::segmentation::{Region, SegmentationMask};
use gbm_radiogenomics::volume::{read_volume, AnyVolume, Sidecar};
use gbm_radiogenomics::{Error, Modality, Volume};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

fn random_f32(r: &mut ChaCha8Rng, dims: [usize; 3]) -> Volume<f32> {
    let n = dims.iter().product();
    let data = (0..n).map(|_| f32::from_bits(r.random::<u32>() & 0x7f7f_ffff)).collect();
    Volume::new(dims, [r.random_range(0.1..3.0), 1.0, 2.5], [r.random_range(-90.0..90.0), 0.0, -1.5], data).unwrap()
}

#[test]
fn float_volume_writes_sidecar_and_payload() {
    let dir = tempfile::tempdir().unwrap();
    let base = dir.path().join("v");
    let v = Volume::new([4, 4, 4], [1.0, 1.5, 2.0], [3.0, -4.0, 0.5], (0..64).map(|i| i as f32 * 0.25).collect()).unwrap();
    v.write(&base).unwrap();
    let raw = std::fs::read(base.with_extension("raw")).unwrap();
    assert_eq!(raw.len(), 256);
    assert_eq!(raw[4..8], 0.25f32.to_le_bytes());
    let json: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(base.with_extension("json")).unwrap()).unwrap();
    let keys: Vec<&String> = json.as_object().unwrap().keys().collect();
    let mut want = vec!["dims", "dtype", "order", "origin_mm", "spacing_mm"];
    want.sort_unstable();
    let mut got: Vec<&str> = keys.iter().map(|k| k.as_str()).collect();
    got.sort_unstable();
    assert_eq!(got, want);
    assert_eq!(json["dims"], serde_json::json!([4, 4, 4]));
    assert_eq!(json["dtype"], "f32");
    assert_eq!(json["order"], "C-little-endian");
    assert_eq!(Volume::<f32>::read(&base).unwrap(), v);
}

#[test]
fn truncated_payload_and_bad_sidecars_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let base = dir.path().join("v");
    Volume::filled([4, 4, 4], [1.0; 3], 1.0f32).unwrap().write(&base).unwrap();
    let raw = base.with_extension("raw");
    let bytes = std::fs::read(&raw).unwrap();
    std::fs::write(&raw, &bytes[..255]).unwrap();
    match Volume::<f32>::read(&base) {
        Err(e @ Error::Data(_)) => assert!(e.to_string().contains("size mismatch"), "{e}"),
        other => panic!("expected a size mismatch, got {other:?}"),
    }
    std::fs::write(&raw, &bytes).unwrap();
    let meta = base.with_extension("json");
    let mut sc: Sidecar = serde_json::from_str(&std::fs::read_to_string(&meta).unwrap()).unwrap();
    sc.dtype = "u8".into();
    std::fs::write(&meta, serde_json::to_string(&sc).unwrap()).unwrap();
    assert!(matches!(read_volume(&base), Err(Error::Data(_))));
    sc.dtype = "f32".into();
    sc.order = "C-big-endian".into();
    std::fs::write(&meta, serde_json::to_string(&sc).unwrap()).unwrap();
    assert!(read_volume(&base).is_err());
    assert!(Volume::<i16>::read(dir.path().join("absent")).is_err());
}

#[test]
fn volume_geometry_is_validated() {
    assert!(Volume::new([0, 2, 2], [1.0; 3], [0.0; 3], Vec::<f32>::new()).is_err());
    assert!(Volume::new([2, 2, 2], [1.0, 0.0, 1.0], [0.0; 3], vec![0f32; 8]).is_err());
    assert!(Volume::new([2, 2, 2], [1.0; 3], [0.0; 3], vec![0f32; 7]).is_err());
}

#[test]
fn hundred_seeded_volumes_round_trip_bit_equal() {
    let dir = tempfile::tempdir().unwrap();
    let mut r = ChaCha8Rng::seed_from_u64(100);
    for k in 0..100 {
        let dims = [r.random_range(1..9), r.random_range(1..9), r.random_range(1..9)];
        let base = dir.path().join(format!("v{k}"));
        if k % 2 == 0 {
            let v = random_f32(&mut r, dims);
            v.write(&base).unwrap();
            let back = Volume::<f32>::read(&base).unwrap();
            assert!(back.data().iter().zip(v.data()).all(|(a, b)| a.to_bits() == b.to_bits()));
            assert_eq!((back.dims(), back.spacing(), back.origin()), (v.dims(), v.spacing(), v.origin()));
        } else {
            let data = (0..dims.iter().product()).map(|_| r.random::<i16>()).collect();
            let v = Volume::new(dims, [1.0; 3], [0.0; 3], data).unwrap();
            v.write(&base).unwrap();
            assert_eq!(read_volume(&base).unwrap(), AnyVolume::I16(v));
        }
    }
}

#[test]
fn normalization_examples() {
    let dims = [6, 6, 6];
    let mut data = vec![0f32; 216];
    for v in data.iter_mut().skip(50).take(100) {
        *v = 1.0;
    }
    let vol = Volume::new(dims, [1.0; 3], [0.0; 3], data).unwrap();
    let out = normalize_intensity(&vol, &nonzero_support(&vol)).unwrap();
    assert!(out.warning.is_some());
    assert!(out.volume.data().iter().zip(vol.data()).all(|(&o, &i)| if i == 0.0 { o == 0.0 } else { o == 0.5 }));
    assert!(normalize_intensity(&vol, &[false; 216]).is_err());
    assert!(normalize_intensity(&vol, &[true; 10]).is_err());
}

#[test]
fn gaussian_volume_normalizes_around_one_half() {
    let mut r = ChaCha8Rng::seed_from_u64(42);
    let g = Normal::new(120.0, 30.0).unwrap();
    let data: Vec<f32> = (0..40 * 40 * 40).map(|_| g.sample(&mut r) as f32).collect();
    let vol = Volume::new([40, 40, 40], [1.0; 3], [0.0; 3], data).unwrap();
    let out = normalize_intensity(&vol, &[true; 64_000]).unwrap();
    assert!(out.warning.is_none());
    let mean = out.volume.data().iter().map(|&v| f64::from(v)).sum::<f64>() / 64_000.0;
    assert!((mean - 0.5).abs() < 0.01, "{mean}");
}

#[test]
fn phantom_shape_contract() {
    let spec = PhantomSpec { grid: [64, 64, 64], seed: 3, ..Default::default() };
    let ds = generate_phantom_dataset(&spec, 8).unwrap();
    assert_eq!(ds.cases.len(), 8);
    assert_eq!((ds.genes.n_patients(), ds.genes.n_genes()), (8, 60));
    assert_eq!(ds.survival.len(), 8);
    assert_eq!(ds.planted_gene_columns.len(), 3);
    for (case, (surv, truth)) in ds.cases.iter().zip(ds.survival.iter().zip(&ds.truth)) {
        assert_eq!(case.available(), vec![Modality::T1c, Modality::Flair, Modality::T2]);
        assert!(case.modalities.values().all(|m| m.provenance == Provenance::Real));
        assert_eq!(case.dims(), Some([64, 64, 64]));
        let mask = case.mask.as_ref().unwrap();
        check_nesting(mask).unwrap();
        assert!(mask.region(Region::Et).iter().any(|&v| v));
        assert_eq!(mask.region(Region::Wt).iter().filter(|&&v| v).count(), truth.wt_voxels);
        assert!(ds.genes.row_of(&case.id).is_some());
        assert_eq!(surv.id, case.id);
        assert!(surv.days > 0);
        assert_eq!(surv.class, ds.spec.thresholds.band(f64::from(surv.days)));
    }
}

#[test]
fn phantom_generation_is_deterministic() {
    let spec = PhantomSpec { seed: 9, ..Default::default() };
    let a = generate_phantom_dataset(&spec, 3).unwrap();
    let b = generate_phantom_dataset(&spec, 3).unwrap();
    assert_eq!(a, b);
    let bits = |c: &CaseRecord| c.volume(Modality::T2).unwrap().data().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
    assert_eq!(bits(&a.cases[2]), bits(&b.cases[2]));
    let c = generate_phantom_dataset(&PhantomSpec { seed: 10, ..Default::default() }, 3).unwrap();
    assert_ne!(a.cases[0], c.cases[0]);
    // a longer run extends a shorter one case for case
    let longer = generate_phantom_dataset(&spec, 4).unwrap();
    assert_eq!(longer.cases[..3], a.cases[..]);
}

#[test]
fn phantom_spec_rejects_non_nested_regions() {
    let spec = PhantomSpec { tc_fraction: (0.8, 1.2), ..Default::default() };
    assert!(matches!(generate_phantom_dataset(&spec, 1), Err(Error::Config(_))));
    assert!(generate_phantom_dataset(&PhantomSpec::default(), 0).is_err());
    // label 4 outside label 1/4 core cannot happen; label 4 outside the tumor can be written
    let mut labels = vec![0i16; 27];
    labels[0] = 4;
    labels[13] = 2;
    let loose = SegmentationMask::new(Volume::new([3, 3, 3], [1.0; 3], [0.0; 3], labels).unwrap()).unwrap();
    assert!(check_nesting(&loose).is_ok());
}

#[test]
fn planted_survival_is_recoverable_from_oracle_factors() {
    let ds = generate_phantom_dataset(&PhantomSpec { seed: 21, ..Default::default() }, 80).unwrap();
    let x: Vec<Vec<f64>> = ds.truth.iter().map(|t| t.as_vector()).collect();
    let days: Vec<f64> = ds.survival.iter().map(|s| f64::from(s.days)).collect();
    let mean = days.iter().sum::<f64>() / days.len() as f64;
    let sd = (days.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / days.len() as f64).sqrt();
    let y: Vec<f64> = days.iter().map(|d| (d - mean) / sd).collect();
    // 4-fold out-of-fold R²
    let mut sse = 0.0;
    for fold in 0..4 {
        let train: Vec<usize> = (0..80).filter(|i| i % 4 != fold).collect();
        let rows: Vec<Vec<f64>> = train.iter().map(|&i| x[i].clone()).collect();
        let st = Standardizer::fit(&rows).unwrap();
        let svr = Svr::fit(
            &st.transform(&rows),
            &train.iter().map(|&i| y[i]).collect::<Vec<_>>(),
            &SvmParams { kernel: Kernel::Linear, ..Default::default() },
        )
        .unwrap();
        sse += (0..80).filter(|i| i % 4 == fold).map(|i| (svr.predict(&st.transform_row(&x[i])) - y[i]).powi(2)).sum::<f64>();
    }
    let r2 = 1.0 - sse / 80.0;
    assert!(r2 >= 0.9, "R² {r2}");
}

#[test]
fn dataset_directory_round_trip() {
    let ds = generate_phantom_dataset(&PhantomSpec { seed: 4, grid: [12, 12, 12], ..Default::default() }, 2).unwrap();
    let mut cases = ds.cases.clone();
    let t2 = cases[1].modalities.remove(&Modality::T2).unwrap();
    cases[1].insert(Modality::T2, t2.volume, Provenance::Synthesized).unwrap();
    let data = Dataset { cases, genes: Some(ds.genes.clone()), survival: Some(ds.survival.clone()) };
    let dir = tempfile::tempdir().unwrap();
    save_dataset(dir.path(), &data).unwrap();
    let manifest = read_manifest(dir.path()).unwrap();
    assert_eq!(manifest[1].modalities[&Modality::T2].provenance, Provenance::Synthesized);
    assert_eq!(manifest[0].mask.as_deref(), Some("cases/case000/mask.raw"));
    let back = load_dataset(dir.path(), &ds.spec.thresholds).unwrap();
    assert_eq!(back, data);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn normalized_values_stay_in_unit_range(seed in 0u64..100_000, scale in 0.001f32..1e4) {
        let mut r = ChaCha8Rng::seed_from_u64(seed);
        let data: Vec<f32> = (0..125).map(|_| if r.random_bool(0.3) { 0.0 } else { r.random_range(-1.0..1.0) * scale }).collect();
        let vol = Volume::new([5, 5, 5], [1.0; 3], [0.0; 3], data).unwrap();
        let support = nonzero_support(&vol);
        prop_assume!(support.iter().any(|&s| s));
        let out = normalize_intensity(&vol, &support).unwrap().volume;
        for (o, s) in out.data().iter().zip(&support) {
            prop_assert!((0.0..=1.0).contains(o));
            if !s {
                prop_assert_eq!(*o, 0.0);
            }
        }
    }

    #[test]
    fn volume_round_trip_is_bit_exact(seed in 0u64..100_000, dims in prop::array::uniform3(1usize..7)) {
        let dir = tempfile::tempdir().unwrap();
        let mut r = ChaCha8Rng::seed_from_u64(seed);
        let v = random_f32(&mut r, dims);
        v.write(dir.path().join("a")).unwrap();
        let back = Volume::<f32>::read(dir.path().join("a")).unwrap();
        prop_assert!(back.data().iter().zip(v.data()).all(|(a, b)| a.to_bits() == b.to_bits()));
        let labels = Volume::new(dims, [1.0; 3], [0.0; 3], (0..v.len()).map(|_| r.random::<i16>()).collect()).unwrap();
        labels.write(dir.path().join("b")).unwrap();
        prop_assert_eq!(Volume::<i16>::read(dir.path().join("b")).unwrap(), labels);
    }
}
