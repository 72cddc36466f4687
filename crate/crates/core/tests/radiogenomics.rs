use gbm_radiogenomics::radiogenomics::ann::{Ann, AnnConfig};
use gbm_radiogenomics::radiogenomics::evaluate::{fold_metrics, write_survival_metrics, FoldMetrics};
use gbm_radiogenomics::radiogenomics::shap::write_shap_csv;
use gbm_radiogenomics::radiogenomics::svm::{Kernel, SvmParams, Svc, Svr};
use gbm_radiogenomics::radiogenomics::*;
use gbm_radiogenomics::Error;
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use SurvivalClass::{Long as L, Medium as M, Short as S};

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn gaussian_rows(r: &mut ChaCha8Rng, n: usize, d: usize) -> Vec<Vec<f64>> {
    (0..n).map(|_| (0..d).map(|_| StandardNormal.sample(&mut *r)).collect()).collect()
}

fn noise(r: &mut ChaCha8Rng) -> f64 {
    StandardNormal.sample(r)
}

fn names(prefix: &str, d: usize) -> Vec<String> {
    (0..d).map(|j| format!("{prefix}{j:02}")).collect()
}

fn ids(n: usize) -> Vec<String> {
    (0..n).map(|i| format!("case{i:03}")).collect()
}

/// Shapley values by averaging marginal contributions over every feature
/// ordering, with the interventional value function over `background`.
fn brute_shapley(f: &dyn Fn(&[f64]) -> f64, x: &[f64], background: &[Vec<f64>]) -> Vec<f64> {
    let m = x.len();
    let value = |coalition: &[bool]| {
        background
            .iter()
            .map(|b| {
                let z: Vec<f64> = (0..m).map(|k| if coalition[k] { x[k] } else { b[k] }).collect();
                f(&z)
            })
            .sum::<f64>()
            / background.len() as f64
    };
    let mut orders = vec![Vec::new()];
    for _ in 0..m {
        orders = orders
            .into_iter()
            .flat_map(|o: Vec<usize>| (0..m).filter(|k| !o.contains(k)).map(|k| [o.clone(), vec![k]].concat()).collect::<Vec<_>>())
            .collect();
    }
    let mut phi = vec![0.0; m];
    for order in &orders {
        let mut coalition = vec![false; m];
        let mut prev = value(&coalition);
        for &k in order {
            coalition[k] = true;
            let cur = value(&coalition);
            phi[k] += cur - prev;
            prev = cur;
        }
    }
    phi.iter().map(|p| p / orders.len() as f64).collect()
}

#[test]
fn gene_table_examples() {
    let csv = "case_id,g1,g2,g3,g4\na,1,2,3,4\nb,0.5,-1,2e3,0\nc,7,7,7,7\n";
    let m = GeneExpressionMatrix::from_reader(csv.as_bytes()).unwrap();
    assert_eq!((m.n_patients(), m.n_genes()), (3, 4));
    assert_eq!(m.value(1, 2), 2000.0);
    assert_eq!(m.row_of("c").unwrap(), &[7.0; 4]);

    let dup = "case_id,g1,g2,g1\na,1,2,3\n";
    match GeneExpressionMatrix::from_reader(dup.as_bytes()) {
        Err(e @ Error::Data(_)) => assert!(e.to_string().contains("g1"), "{e}"),
        other => panic!("expected a duplicate-column error, got {other:?}"),
    }
    assert!(GeneExpressionMatrix::from_reader("case_id,g1\na,1\na,2\n".as_bytes()).is_err());
    assert!(GeneExpressionMatrix::from_reader("case_id,g1\na,x\n".as_bytes()).is_err());
    assert!(GeneExpressionMatrix::from_reader("case_id,g1,g2\na,1\n".as_bytes()).is_err());
}

#[test]
fn cohort_sized_gene_table_round_trips_bit_equal() {
    let mut r = rng(106);
    let values: Vec<f64> = (0..106 * 1740).map(|_| StandardNormal.sample(&mut r)).map(|v: f64| v.exp() * 1e-3).collect();
    let m = GeneExpressionMatrix::new(ids(106), names("gene", 1740), values).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("genes.csv");
    genes::write_gene_expression(&m, &path).unwrap();
    let back = load_gene_expression(&path).unwrap();
    assert_eq!(back.patients(), m.patients());
    assert_eq!(back.genes(), m.genes());
    for i in 0..106 {
        let (a, b) = (m.row(i), back.row(i));
        assert!(a.iter().zip(b).all(|(x, y)| x.to_bits() == y.to_bits()));
    }
}

fn radiomic_table(n: usize, d: usize, seed: u64) -> RadiomicTable {
    let rows = gaussian_rows(&mut rng(seed), n, d);
    RadiomicTable { names: names("rad", d), rows: ids(n).into_iter().zip(rows).collect() }
}

fn gene_matrix(ids: Vec<String>, d: usize, seed: u64) -> GeneExpressionMatrix {
    let mut r = rng(seed);
    let values = (0..ids.len() * d).map(|_| r.random_range(0.0..2.0)).collect();
    GeneExpressionMatrix::new(ids, names("gene", d), values).unwrap()
}

fn records(ids: &[String], seed: u64) -> Vec<SurvivalRecord> {
    let mut r = rng(seed);
    ids.iter()
        .map(|id| SurvivalRecord::new(id.clone(), r.random_range(50..900), Some(r.random_range(30.0..80.0)), &Thresholds::default()).unwrap())
        .collect()
}

#[test]
fn fusion_examples() {
    let rad = radiomic_table(6, 71, 1);
    let genes = gene_matrix(ids(6), 1740, 2);
    let surv = records(&ids(6), 3);
    let (set, report) = fuse(Some(&rad), Some(&genes), Some(&surv)).unwrap();
    assert_eq!(set.n_columns(), 1812);
    assert_eq!(
        (set.count(ColumnSource::Radiomic), set.count(ColumnSource::Genomic), set.count(ColumnSource::Clinical)),
        (71, 1740, 1)
    );
    assert!(report.dropped.is_empty());
    assert_eq!(set.rows[2][..71], rad.rows[2].1[..]);
    assert_eq!(set.rows[2][71..1811], *genes.row(2));
    assert_eq!(set.rows[2][1811], surv[2].age.unwrap());

    let partial = gene_matrix(ids(6)[1..].to_vec(), 5, 4);
    let (set, report) = fuse(Some(&rad), Some(&partial), None).unwrap();
    assert_eq!(set.n_cases(), 5);
    assert_eq!(report.dropped, vec!["case000".to_string()]);
    assert_eq!(set.n_columns(), 76);

    let other = gene_matrix(vec!["x".into(), "y".into()], 5, 5);
    assert!(matches!(fuse(Some(&rad), Some(&other), None), Err(Error::Data(_))));
    assert!(matches!(fuse(None, None, None), Err(Error::Config(_))));
}

#[test]
fn rfe_examples() {
    let mut r = rng(7);
    let x = gaussian_rows(&mut r, 40, 6);
    let y: Vec<f64> = x.iter().map(|row| row[0] - row[3]).collect();
    let n = names("f", 6);
    let all = rfe_select(&x, &n, &y, 6, &RfeConfig::default()).unwrap();
    assert_eq!(all.selected, (0..6).collect::<Vec<_>>());
    assert!(all.eliminated.is_empty());
    assert!(matches!(rfe_select(&x, &n, &y, 7, &RfeConfig::default()), Err(Error::Config(_))));
    assert!(rfe_select(&x, &n, &y, 0, &RfeConfig::default()).is_err());
}

#[test]
fn rfe_finds_planted_columns() {
    let planted = [2usize, 9, 15];
    let mut hits = 0;
    for seed in 0..40 {
        let mut r = rng(1000 + seed);
        let x = gaussian_rows(&mut r, 60, 20);
        let y: Vec<f64> = x.iter().map(|row| 2.0 * row[2] - 1.5 * row[9] + row[15] + 0.1 * noise(&mut r)).collect();
        let res = rfe_select(&x, &names("f", 20), &y, 3, &RfeConfig::default()).unwrap();
        assert_eq!(res.selected.len(), 3);
        assert_eq!(res.eliminated.len(), 17);
        let mut got = res.selected.clone();
        got.sort_unstable();
        hits += usize::from(got == planted);
    }
    assert!(hits >= 38, "planted columns recovered in {hits}/40 runs");
}

#[test]
fn rfe_on_a_fused_set_returns_51_names() {
    let rad = radiomic_table(30, 71, 8);
    let genes = gene_matrix(ids(30), 60, 9);
    let surv = records(&ids(30), 10);
    let (set, _) = fuse(Some(&rad), Some(&genes), Some(&surv)).unwrap();
    let days: Vec<f64> = surv.iter().map(|s| f64::from(s.days)).collect();
    let res = rfe_select(&set.rows, &set.names, &days, 51, &RfeConfig::default()).unwrap();
    assert_eq!(res.selected_names.len(), 51);
    assert_eq!(res.target, 51);
    let again = rfe_select(&set.rows, &set.names, &days, 51, &RfeConfig::default()).unwrap();
    assert_eq!(res, again);
}

#[test]
fn svr_fits_a_linear_target() {
    let mut r = rng(11);
    let x = gaussian_rows(&mut r, 80, 3);
    let y: Vec<f64> = x.iter().map(|row| 0.8 * row[0] - 0.5 * row[1] + 0.3 * row[2]).collect();
    let m = y.iter().sum::<f64>() / 80.0;
    let var = y.iter().map(|v| (v - m).powi(2)).sum::<f64>() / 80.0;
    let params = SvmParams { c: 10.0, epsilon: 0.01, ..Default::default() };
    let svr = Svr::fit(&x, &y, &params).unwrap();
    let mse = x.iter().zip(&y).map(|(row, t)| (svr.predict(row) - t).powi(2)).sum::<f64>() / 80.0;
    assert!(mse < 0.01 * var, "mse {mse} vs variance {var}");
    let again = Svr::fit(&x, &y, &params).unwrap();
    assert!(x.iter().all(|row| svr.predict(row) == again.predict(row)));

    let lin = Svr::fit(&x, &y, &SvmParams { kernel: Kernel::Linear, c: 10.0, epsilon: 0.01, ..Default::default() }).unwrap();
    let w = lin.linear_weights().unwrap();
    assert!((w[0] - 0.8).abs() < 0.05 && (w[1] + 0.5).abs() < 0.05 && (w[2] - 0.3).abs() < 0.05, "{w:?}");
    assert!(svr.linear_weights().is_none());
}

#[test]
fn ann_interpolates_a_single_sample() {
    let x = vec![vec![0.3, -1.2, 0.7]];
    let net = Ann::fit(&x, &[0.42], &AnnConfig::default()).unwrap();
    assert_eq!(net.hidden(), 6);
    assert!((net.predict(&x[0]) - 0.42).abs() < 1e-6, "{}", net.predict(&x[0]));
    assert!(Ann::fit(&x, &[0.42], &AnnConfig { hidden: 0, ..Default::default() }).is_err());
}

#[test]
fn seeded_ann_is_reproducible() {
    let mut r = rng(12);
    let x = gaussian_rows(&mut r, 40, 4);
    let y: Vec<f64> = x.iter().map(|row| row[0].max(0.0) - row[1]).collect();
    let cfg = AnnConfig { seed: 5, epochs: 300, ..Default::default() };
    let (a, b) = (Ann::fit(&x, &y, &cfg).unwrap(), Ann::fit(&x, &y, &cfg).unwrap());
    assert!(x.iter().all(|row| a.predict(row) == b.predict(row)));
}

#[test]
fn classification_examples() {
    let th = Thresholds::default();
    assert_eq!(classify_survival(200, &th).unwrap(), S);
    assert_eq!(classify_survival(400, &th).unwrap(), M);
    assert_eq!(classify_survival(600, &th).unwrap(), L);
    assert_eq!(classify_survival(305, &th).unwrap(), M);
    assert_eq!(classify_survival(456, &th).unwrap(), M);
    assert!(classify_survival(0, &th).is_err());
    assert!(classify_survival(-3, &th).is_err());
    let inverted = Thresholds { short_below: 500.0, long_above: 100.0 };
    assert!(matches!(classify_survival(200, &inverted), Err(Error::Config(_))));
}

#[test]
fn svc_rejects_a_single_class() {
    let x = gaussian_rows(&mut rng(13), 10, 2);
    assert!(Svc::fit(&x, &[1; 10], &SvmParams::default()).is_err());
    let labels: Vec<usize> = x.iter().map(|r| usize::from(r[0] > 0.0) * 2).collect();
    let svc = Svc::fit(&x, &labels, &SvmParams { c: 100.0, ..Default::default() }).unwrap();
    assert!(x.iter().zip(&labels).all(|(r, &l)| svc.predict(r) == l));
}

#[test]
fn perfect_predictor_scores_full_marks() {
    let truth = [S, M, L, S, L, M, M];
    let days = [100.0, 350.0, 700.0, 20.0, 999.0, 420.0, 305.0];
    let m = fold_metrics(&truth, &truth, Some((&days, &days))).unwrap();
    assert_eq!(m.mse, Some(0.0));
    assert_eq!(m.accuracy, 1.0);
    assert_eq!(m.sensitivity, [Some(1.0); 3]);
    assert_eq!(m.specificity, [Some(1.0); 3]);
}

#[test]
fn thirteen_case_confusion_oracle() {
    let truth = [S, S, S, S, S, M, M, M, M, L, L, L, L];
    let pred = [S, S, S, M, L, M, M, S, M, L, L, M, L];
    let m = fold_metrics(&truth, &pred, None).unwrap();
    assert_eq!(m.confusion, [[3, 1, 1], [1, 3, 0], [0, 1, 3]]);
    assert_eq!(m.accuracy, 9.0 / 13.0);
    assert_eq!(m.mse, None);
    // one-vs-rest tables: (tp, fn, fp, tn)
    let tables = [(3, 2, 1, 7), (3, 1, 2, 7), (3, 1, 1, 8)];
    for (k, (tp, fnn, fp, tn)) in tables.into_iter().enumerate() {
        assert_eq!(m.sensitivity[k], Some(tp as f64 / (tp + fnn) as f64));
        assert_eq!(m.specificity[k], Some(tn as f64 / (tn + fp) as f64));
    }
}

#[test]
fn absent_class_is_flagged_undefined() {
    let m = fold_metrics(&[S, S, M], &[S, M, M], Some((&[1.0, 2.0, 3.0], &[1.0, 2.0, 5.0]))).unwrap();
    assert_eq!(m.sensitivity[2], None);
    assert_eq!(m.specificity[2], Some(1.0));
    assert_eq!(m.mse, Some(4.0 / 3.0));
    let all_short = fold_metrics(&[S, S], &[S, M], None).unwrap();
    assert_eq!(all_short.specificity[0], None);
    assert!(fold_metrics(&[], &[], None).is_err());
    assert!(fold_metrics(&[S], &[S, S], None).is_err());
}

#[test]
fn average_row_is_the_arithmetic_mean() {
    let f1 = fold_metrics(&[S, M, L, L], &[S, M, M, L], Some((&[1.0, 2.0, 3.0, 4.0], &[1.0, 2.0, 3.0, 6.0]))).unwrap();
    let f2 = fold_metrics(&[S, S, M, M], &[S, M, M, S], Some((&[1.0; 4], &[3.0; 4]))).unwrap();
    let eval = SurvivalEvaluation { model: SurvivalModelKind::Svr, folds: vec![vec![0], vec![1]], fold_metrics: vec![f1.clone(), f2.clone()] };
    let avg = eval.average();
    assert_eq!(avg.mse, Some((1.0 + 4.0) / 2.0));
    assert_eq!(avg.accuracy, (0.75 + 0.5) / 2.0);
    assert_eq!(avg.sensitivity[0], Some((1.0 + 0.5) / 2.0));
    // fold 2 has no long case, so the mean covers fold 1 only
    assert_eq!(avg.sensitivity[2], f1.sensitivity[2]);
    let mut buf = Vec::new();
    write_survival_metrics(&[&eval], &mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "model,fold,mse,accuracy,sens_short,sens_medium,sens_long,spec_short,spec_medium,spec_long");
    assert_eq!(lines.len(), 4);
    assert!(lines[2].starts_with("svr,2,4.000000,0.500000,0.500000,0.500000,NA,"));
    assert!(lines[3].starts_with("svr,average,2.500000,0.625000,"));
}

fn sum_check(m: &FoldMetrics) {
    let n: usize = m.confusion.iter().flatten().sum();
    for k in 0..3 {
        let pos: usize = m.confusion[k].iter().sum();
        if let Some(s) = m.sensitivity[k] {
            let tp = (s * pos as f64).round() as usize;
            assert_eq!(tp, m.confusion[k][k]);
            assert_eq!(tp + (pos - tp), pos);
        }
        if let Some(s) = m.specificity[k] {
            let neg = n - pos;
            let tn = (s * neg as f64).round() as usize;
            let fp: usize = (0..3).filter(|&t| t != k).map(|t| m.confusion[t][k]).sum();
            assert_eq!(tn + fp, neg);
        }
    }
}

#[test]
fn standardization_uses_training_rows_only() {
    let mut r = rng(14);
    let train = gaussian_rows(&mut r, 50, 3);
    let shifted: Vec<Vec<f64>> = gaussian_rows(&mut r, 20, 3).into_iter().map(|row| row.iter().map(|v| v + 5.0).collect()).collect();
    let st = Standardizer::fit(&train).unwrap();
    let z = st.transform(&shifted);
    for k in 0..3 {
        let mean = z.iter().map(|row| row[k]).sum::<f64>() / 20.0;
        assert!(mean > 3.0, "column {k}: validation mean {mean}");
        let tmean = st.transform(&train).iter().map(|row| row[k]).sum::<f64>() / 50.0;
        assert!(tmean.abs() < 1e-12);
    }
    let constant = vec![vec![2.0, 1.0]; 4];
    assert_eq!(Standardizer::fit(&constant).unwrap().std, vec![1.0, 1.0]);
}

#[test]
fn survival_evaluation_on_planted_cohort() {
    let mut r = rng(15);
    let rows = gaussian_rows(&mut r, 48, 4);
    let id = ids(48);
    let recs: Vec<SurvivalRecord> = rows
        .iter()
        .zip(&id)
        .map(|(row, i)| SurvivalRecord::new(i.clone(), (380.0 + 150.0 * row[0]).clamp(30.0, 2000.0) as u32, Some(50.0), &Thresholds::default()).unwrap())
        .collect();
    let set = FusedFeatureSet {
        case_ids: id,
        names: names("f", 4),
        sources: vec![ColumnSource::Radiomic; 4],
        rows,
    };
    for model in [SurvivalModelKind::Svr, SurvivalModelKind::Svc, SurvivalModelKind::Ann] {
        let cfg = SurvivalConfig { model, seed: 3, ..Default::default() };
        let eval = evaluate_survival(&set, &recs, &cfg).unwrap();
        assert_eq!(eval.fold_metrics.len(), 4);
        let mut seen = eval.folds.concat();
        seen.sort_unstable();
        assert_eq!(seen, (0..48).collect::<Vec<_>>());
        eval.fold_metrics.iter().for_each(sum_check);
        assert!(eval.average().accuracy > 0.5, "{model:?}: {}", eval.average().accuracy);
        assert_eq!(eval.average().mse.is_none(), model == SurvivalModelKind::Svc);
        assert_eq!(eval, evaluate_survival(&set, &recs, &cfg).unwrap());
    }
    let missing = &recs[1..];
    assert!(evaluate_survival(&set, missing, &SurvivalConfig::default()).is_err());
}

fn linear(w: Vec<f64>) -> impl Fn(&[f64]) -> f64 {
    move |x: &[f64]| x.iter().zip(&w).map(|(a, b)| a * b).sum::<f64>() + 0.5
}

#[test]
fn shap_linear_closed_form() {
    let mut r = rng(16);
    let w = vec![1.5, -2.0, 0.0, 0.7];
    let f = linear(w.clone());
    let bg = gaussian_rows(&mut r, 12, 4);
    let x = vec![0.3, 1.1, -4.0, 2.2];
    let s = shap_exact(&f, &x, &bg).unwrap();
    assert!(s.exact);
    for k in 0..4 {
        let mean = bg.iter().map(|b| b[k]).sum::<f64>() / 12.0;
        assert!((s.phi[k] - w[k] * (x[k] - mean)).abs() < 1e-12);
    }
    assert_eq!(s.phi[2], 0.0);
    let centre: Vec<f64> = (0..4).map(|k| bg.iter().map(|b| b[k]).sum::<f64>() / 12.0).collect();
    let z = shap_exact(&f, &centre, &bg).unwrap();
    assert!(z.phi.iter().all(|p| p.abs() < 1e-12));
}

#[test]
fn shap_matches_ordering_enumeration() {
    let mut r = rng(17);
    let f = |x: &[f64]| (x[0] * x[1]).tanh() + x[2].max(0.0) * x[3] - 0.3 * x[4] * x[0];
    for _ in 0..5 {
        let bg = gaussian_rows(&mut r, 6, 5);
        let x = gaussian_rows(&mut r, 1, 5).remove(0);
        let s = shap_exact(&f, &x, &bg).unwrap();
        let want = brute_shapley(&f, &x, &bg);
        for k in 0..5 {
            assert!((s.phi[k] - want[k]).abs() < 1e-12, "{k}: {} vs {}", s.phi[k], want[k]);
        }
        assert!((s.base + s.phi.iter().sum::<f64>() - f(&x)).abs() <= 1e-6);
    }
}

#[test]
fn shap_errors_and_modes() {
    let f = |x: &[f64]| x.iter().sum::<f64>();
    assert!(shap_exact(&f, &[1.0], &[]).is_err());
    assert!(shap_exact(&f, &[1.0, 2.0], &[vec![0.0]]).is_err());
    assert!(matches!(shap_exact(&f, &[0.0; 16], &[vec![0.0; 16]]), Err(Error::Config(_))));
    let bg = vec![vec![0.0; 16]];
    assert!(!shap_attribution(&f, &[1.0; 16], &bg, 32, 0).unwrap().exact);
    assert!(shap_attribution(&f, &[1.0; 15], &[vec![0.0; 15]], 32, 0).unwrap().exact);
}

#[test]
fn sampled_shap_is_efficient_per_background_row() {
    let mut r = rng(18);
    let f = |x: &[f64]| x.iter().enumerate().map(|(k, v)| (v * (k + 1) as f64).sin()).product::<f64>() + x[0] * x[19];
    let x = gaussian_rows(&mut r, 1, 20).remove(0);
    let b = gaussian_rows(&mut r, 1, 20);
    let s = shap_sampled(&f, &x, &b, 64, 3).unwrap();
    assert!((s.phi.iter().sum::<f64>() - (f(&x) - f(&b[0]))).abs() < 1e-9);
    assert_eq!(s, shap_sampled(&f, &x, &b, 64, 3).unwrap());
}

#[test]
fn ranking_examples() {
    let n = names("f", 3);
    let src = vec![ColumnSource::Radiomic, ColumnSource::Genomic, ColumnSource::Clinical];
    let one = rank_features_by_shap(&n, &src, &[vec![0.2, -0.9, 0.5]]).unwrap();
    let order: Vec<&str> = one.iter().map(|r| r.feature.as_str()).collect();
    assert_eq!(order, ["f01", "f02", "f00"]);
    assert_eq!(one[0].source, ColumnSource::Genomic);
    assert!(rank_features_by_shap(&n, &src, &[]).is_err());
    let mut buf = Vec::new();
    write_shap_csv(&one, Some(2), &mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    assert_eq!(text.lines().count(), 3);
    assert!(text.starts_with("feature,mean_abs_shap,provenance\nf01,0.900000000,genomic\n"));
}

#[test]
fn planted_dominant_feature_ranks_first() {
    let mut first = 0;
    for seed in 0..20 {
        let mut r = rng(2000 + seed);
        let x = gaussian_rows(&mut r, 40, 5);
        let y: Vec<f64> = x.iter().map(|row| 2.0 * row[3] + 0.3 * row[0] - 0.2 * row[1] + 0.1 * noise(&mut r)).collect();
        let svr = Svr::fit(&x, &y, &SvmParams::default()).unwrap();
        let f = |z: &[f64]| svr.predict(z);
        let bg = &x[..10];
        let attributions: Vec<Vec<f64>> = x[10..20].iter().map(|row| shap_exact(&f, row, bg).unwrap().phi).collect();
        let ranks = rank_features_by_shap(&names("f", 5), &[ColumnSource::Radiomic; 5], &attributions).unwrap();
        first += usize::from(ranks[0].feature == "f03");
    }
    assert!(first >= 19, "dominant feature first in {first}/20 runs");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn shap_axioms_hold_exactly(seed in 0u64..100_000, m in 3usize..8) {
        let mut r = rng(seed);
        let bg = gaussian_rows(&mut r, 4, m);
        let x = gaussian_rows(&mut r, 1, m).remove(0);
        // the last feature is ignored; features 0 and 1 enter symmetrically
        let f = |z: &[f64]| (z[0] + z[1]).powi(2) + (2..m - 1).map(|k| z[k].sin() * (z[0] + z[1])).sum::<f64>() + z[0] * z[1];
        let s = shap_exact(&f, &x, &bg).unwrap();
        prop_assert!((s.base + s.phi.iter().sum::<f64>() - f(&x)).abs() <= 1e-6);
        prop_assert_eq!(s.phi[m - 1], 0.0);
        let mut xs = x.clone();
        xs[1] = xs[0];
        let bgs: Vec<Vec<f64>> = bg.iter().map(|b| { let mut b = b.clone(); b[1] = b[0]; b }).collect();
        let s = shap_exact(&f, &xs, &bgs).unwrap();
        prop_assert!((s.phi[0] - s.phi[1]).abs() < 1e-12);
    }

    #[test]
    fn ranking_ignores_case_order(seed in 0u64..100_000) {
        let mut r = rng(seed);
        let mut attr = gaussian_rows(&mut r, 6, 4);
        let n = names("f", 4);
        let src = [ColumnSource::Genomic; 4];
        let a = rank_features_by_shap(&n, &src, &attr).unwrap();
        attr.shuffle(&mut r);
        let b = rank_features_by_shap(&n, &src, &attr).unwrap();
        let order = |v: &[shap::ShapRank]| v.iter().map(|x| x.feature.clone()).collect::<Vec<_>>();
        prop_assert_eq!(order(&a), order(&b));
        for (p, q) in a.iter().zip(&b) {
            prop_assert!((p.mean_abs_shap - q.mean_abs_shap).abs() < 1e-12);
        }
    }

    #[test]
    fn rfe_ignores_column_order(seed in 0u64..10_000) {
        let mut r = rng(seed);
        let x = gaussian_rows(&mut r, 30, 8);
        let y: Vec<f64> = x.iter().map(|row| row[1] - 0.5 * row[6] + 0.2 * row[4]).collect();
        let n = names("f", 8);
        let mut perm: Vec<usize> = (0..8).collect();
        perm.shuffle(&mut r);
        let xp: Vec<Vec<f64>> = x.iter().map(|row| perm.iter().map(|&c| row[c]).collect()).collect();
        let np: Vec<String> = perm.iter().map(|&c| n[c].clone()).collect();
        let cfg = RfeConfig { step_fraction: 0.3, ..Default::default() };
        let mut a = rfe_select(&x, &n, &y, 3, &cfg).unwrap().selected_names;
        let mut b = rfe_select(&xp, &np, &y, 3, &cfg).unwrap().selected_names;
        a.sort();
        b.sort();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn confusion_is_reconstructed_from_rates(seed in 0u64..100_000, n in 1usize..40) {
        let mut r = rng(seed);
        let truth: Vec<SurvivalClass> = (0..n).map(|_| SurvivalClass::from_index(r.random_range(0..3))).collect();
        let pred: Vec<SurvivalClass> = (0..n).map(|_| SurvivalClass::from_index(r.random_range(0..3))).collect();
        let m = fold_metrics(&truth, &pred, None).unwrap();
        sum_check(&m);
        prop_assert_eq!(m.confusion.iter().flatten().sum::<usize>(), n);
    }
}
