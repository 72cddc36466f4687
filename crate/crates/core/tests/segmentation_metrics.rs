mod common;

use common::*;
use gbm_radiogenomics::segmentation::mask::CLASS_LABELS;
use gbm_radiogenomics::segmentation::*;
use gbm_radiogenomics::{Error, Volume};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn mask(labels: Vec<i16>, dims: [usize; 3]) -> SegmentationMask {
    SegmentationMask::new(Volume::new(dims, [1.0; 3], [0.0; 3], labels).unwrap()).unwrap()
}

fn random_labels(rng: &mut impl Rng, n: usize) -> Vec<i16> {
    (0..n).map(|_| CLASS_LABELS[rng.random_range(0..4)]).collect()
}

#[test]
fn dice_examples() {
    let dims = [4, 4, 4];
    let mut a = vec![false; 64];
    let mut b = vec![false; 64];
    for x in 0..2 {
        for y in 0..2 {
            for z in 0..2 {
                a[idx(dims, x, y, z)] = true;
                b[idx(dims, x + 1, y, z)] = true;
            }
        }
    }
    assert_eq!(dice(&a, &a).unwrap(), 1.0);
    assert_eq!(dice(&a, &b).unwrap(), 0.5);
    let mut far = vec![false; 64];
    far[63] = true;
    assert_eq!(dice(&a, &far).unwrap(), 0.0);
    assert_eq!(dice(&[false; 64], &[false; 64]).unwrap(), 1.0);
    assert!(dice(&a, &far[..10]).is_err());
}

#[test]
fn hausdorff_examples() {
    let dims = [5, 5, 5];
    let mut a = vec![false; 125];
    let mut b = vec![false; 125];
    a[idx(dims, 0, 2, 2)] = true;
    b[idx(dims, 3, 2, 2)] = true;
    for p in [95.0, 100.0] {
        assert_eq!(hausdorff(&a, &b, dims, [1.0; 3], p).unwrap(), 3.0);
        assert_eq!(hausdorff(&a, &a, dims, [1.0; 3], p).unwrap(), 0.0);
    }
    assert!(matches!(hausdorff(&a, &[false; 125], dims, [1.0; 3], 95.0), Err(Error::Undefined(_))));
}

#[test]
fn metrics_match_brute_force_on_random_pairs() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for _ in 0..200 {
        let dims = [rng.random_range(1..=6), rng.random_range(1..=6), rng.random_range(1..=6)];
        let spacing = [rng.random_range(0.5..2.0), rng.random_range(0.5..2.0), rng.random_range(0.5..2.0)];
        let (da, db) = (rng.random_range(0.05..0.7), rng.random_range(0.05..0.7));
        let a = random_mask(&mut rng, dims, da);
        let b = random_mask(&mut rng, dims, db);
        assert_eq!(dice(&a, &b).unwrap(), brute_dice(&a, &b));
        if a.iter().any(|&v| v) && b.iter().any(|&v| v) {
            for p in [95.0, 100.0] {
                let got = hausdorff(&a, &b, dims, spacing, p).unwrap();
                let want = brute_hausdorff(&a, &b, dims, spacing, p);
                assert!((got - want).abs() <= 1e-9, "{dims:?} p{p}: {got} vs {want}");
            }
        }
    }
}

#[test]
fn region_scores_examples() {
    let dims = [6, 6, 6];
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let truth = mask(random_labels(&mut rng, 216), dims);
    let s = evaluate_regions(&truth, &truth).unwrap();
    assert_eq!((s.et.dice, s.wt.dice, s.tc.dice), (1.0, 1.0, 1.0));
    let erased: Vec<i16> = truth.volume().data().iter().map(|&l| if l == 2 { 0 } else { l }).collect();
    let s = evaluate_regions(&mask(erased, dims), &truth).unwrap();
    assert!(s.wt.dice < 1.0);
    assert_eq!((s.et.dice, s.tc.dice), (1.0, 1.0));
}

#[test]
fn region_scores_compose_binarize_then_dice() {
    let dims = [5, 6, 4];
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for _ in 0..50 {
        let p = random_labels(&mut rng, 120);
        let t = random_labels(&mut rng, 120);
        let s = evaluate_regions(&mask(p.clone(), dims), &mask(t.clone(), dims)).unwrap();
        for (set, got) in [(&[4][..], s.et), (&[1, 2, 4][..], s.wt), (&[1, 4][..], s.tc)] {
            let bp: Vec<bool> = p.iter().map(|l| set.contains(l)).collect();
            let bt: Vec<bool> = t.iter().map(|l| set.contains(l)).collect();
            assert_eq!(got.dice, brute_dice(&bp, &bt));
            if bp.iter().any(|&v| v) && bt.iter().any(|&v| v) {
                assert!((got.hd95.unwrap() - brute_hausdorff(&bp, &bt, dims, [1.0; 3], 95.0)).abs() < 1e-9);
            }
        }
    }
}

#[test]
fn rejects_foreign_labels() {
    let v = Volume::new([2, 1, 1], [1.0; 3], [0.0; 3], vec![0i16, 3]).unwrap();
    assert!(SegmentationMask::new(v).is_err());
}

#[test]
fn metrics_csv_layout() {
    let s = evaluate_regions(&mask(vec![4; 8], [2, 2, 2]), &mask(vec![4; 8], [2, 2, 2])).unwrap();
    let mut buf = Vec::new();
    write_metrics_csv(&[("m".into(), s)], &mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    assert!(text.starts_with("model,dice_et,dice_wt,dice_tc,hd_et,hd_wt,hd_tc,"));
    assert!(text.contains("m,1.000000,1.000000,1.000000,0.000000"));
}

#[test]
fn case_folds_examples() {
    let folds = case_folds(8, 4, 3).unwrap();
    assert!(folds.iter().all(|f| f.len() == 2));
    assert_eq!(folds, case_folds(8, 4, 3).unwrap());
    let mut all: Vec<usize> = folds.concat();
    all.sort_unstable();
    assert_eq!(all, (0..8).collect::<Vec<_>>());
    assert!(case_folds(3, 4, 0).is_err());
}

proptest! {
    #[test]
    fn dice_bounded_and_symmetric(seed in 0u64..100_000, n in 1usize..200) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = random_mask(&mut rng, [n, 1, 1], 0.4);
        let b = random_mask(&mut rng, [n, 1, 1], 0.4);
        let d = dice(&a, &b).unwrap();
        prop_assert!((0.0..=1.0).contains(&d));
        prop_assert_eq!(d, dice(&b, &a).unwrap());
        prop_assert_eq!(dice(&a, &a).unwrap(), 1.0);
    }

    #[test]
    fn hausdorff_symmetric_and_percentile_monotone(seed in 0u64..100_000) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let dims = [5, 5, 5];
        let a = random_mask(&mut rng, dims, 0.3);
        let b = random_mask(&mut rng, dims, 0.3);
        prop_assume!(a.iter().any(|&v| v) && b.iter().any(|&v| v));
        let h95 = hausdorff(&a, &b, dims, [1.0; 3], 95.0).unwrap();
        let h100 = hausdorff(&a, &b, dims, [1.0; 3], 100.0).unwrap();
        prop_assert_eq!(h95, hausdorff(&b, &a, dims, [1.0; 3], 95.0).unwrap());
        prop_assert!(h95 <= h100);
        prop_assert_eq!(hausdorff(&a, &a, dims, [1.0; 3], 100.0).unwrap(), 0.0);
    }

    #[test]
    fn regions_are_nested(seed in 0u64..100_000) {
        let labels = random_labels(&mut ChaCha8Rng::seed_from_u64(seed), 64);
        let m = mask(labels, [4, 4, 4]);
        let (et, tc, wt) = (m.region(Region::Et), m.region(Region::Tc), m.region(Region::Wt));
        for i in 0..64 {
            prop_assert!(!et[i] || tc[i]);
            prop_assert!(!tc[i] || wt[i]);
        }
    }

    #[test]
    fn folds_partition_cases(n in 2usize..60, k in 2usize..8, seed in 0u64..1000) {
        prop_assume!(n >= k);
        let folds = case_folds(n, k, seed).unwrap();
        let mut all: Vec<usize> = folds.concat();
        all.sort_unstable();
        prop_assert_eq!(all, (0..n).collect::<Vec<_>>());
        let sizes: Vec<usize> = folds.iter().map(Vec::len).collect();
        prop_assert!(sizes.iter().max().unwrap() - sizes.iter().min().unwrap() <= 1);
    }
}
