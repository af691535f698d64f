mod oracle;

use flowsieve::classifiers::{ClassifierSpec, KnnParams, TreeParams};
use flowsieve::evaluation::{stratified_folds, stratified_split_indices};
use flowsieve::scaling::fit_scaler;
use flowsieve::stats::{entropy, information_gain, kendall_tau_b, pearson, spearman};
use flowsieve::synth::{generate, SynthSpec};
use flowsieve::Dataset;
use proptest::prelude::*;

fn paired(max: usize) -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
    (2..max).prop_flat_map(|n| {
        let v = prop_oneof![-1e3f64..1e3, (0u8..5).prop_map(f64::from)];
        (proptest::collection::vec(v.clone(), n), proptest::collection::vec(v, n))
    })
}

fn labelled(max_rows: usize, max_features: usize) -> impl Strategy<Value = Dataset> {
    any::<u64>().prop_map(move |seed| oracle::random_dataset(&mut oracle::rng(seed), max_rows, max_features))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn correlations_symmetric_and_bounded((x, y) in paired(60)) {
        for f in [pearson, spearman, kendall_tau_b] {
            let a = f(&x, &y).unwrap();
            let b = f(&y, &x).unwrap();
            match (a, b) {
                (Some(a), Some(b)) => {
                    prop_assert!((a - b).abs() < 1e-12);
                    prop_assert!((-1.0 - 1e-12..=1.0 + 1e-12).contains(&a));
                }
                (None, None) => {}
                _ => prop_assert!(false, "asymmetric None"),
            }
        }
    }

    #[test]
    fn self_correlation_is_one((x, _) in paired(60)) {
        if let Some(r) = spearman(&x, &x).unwrap() {
            prop_assert!((r - 1.0).abs() < 1e-12);
        }
        if let Some(t) = kendall_tau_b(&x, &x).unwrap() {
            prop_assert!((t - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn info_gain_between_zero_and_entropy(
        x in proptest::collection::vec(-50.0f64..50.0, 2..80),
        seed in any::<u64>(),
        bins in 2usize..12,
    ) {
        let y: Vec<u8> = x.iter().enumerate().map(|(i, _)| u8::from((seed >> (i % 64)) & 1 == 1)).collect();
        let h = entropy(&y).unwrap();
        let ig = information_gain(&x, &y, bins).unwrap();
        prop_assert!(ig >= 0.0 && ig <= h + 1e-12, "ig {} h {}", ig, h);
        prop_assert!((ig - oracle::info_gain_reference(&x, &y, bins)).abs() < 1e-12);
    }

    #[test]
    fn split_preserves_rows(d in labelled(200, 3), frac in 0.1f64..0.9, seed in any::<u64>()) {
        let (train, test) = stratified_split_indices(d.y(), frac, seed).unwrap();
        let mut all: Vec<usize> = train.iter().chain(&test).copied().collect();
        all.sort_unstable();
        prop_assert_eq!(all, (0..d.n_rows()).collect::<Vec<_>>());
        let [n0, n1] = d.class_counts();
        let test_pos = test.iter().filter(|&&i| d.y()[i] == 1).count();
        let test_neg = test.len() - test_pos;
        prop_assert!((test_pos as f64 - frac * n1 as f64).abs() <= 1.0);
        prop_assert!((test_neg as f64 - frac * n0 as f64).abs() <= 1.0);
    }

    #[test]
    fn folds_partition(d in labelled(200, 2), k in 2usize..6, seed in any::<u64>()) {
        let counts = d.class_counts();
        prop_assume!(counts.iter().all(|&c| c >= k));
        let folds = stratified_folds(d.y(), k, seed).unwrap();
        prop_assert_eq!(folds.len(), d.n_rows());
        for class in 0..2u8 {
            let mut sizes = vec![0usize; k];
            for (f, &l) in folds.iter().zip(d.y()) {
                if l == class {
                    sizes[*f] += 1;
                }
            }
            prop_assert!(sizes.iter().max().unwrap() - sizes.iter().min().unwrap() <= 1);
        }
    }

    #[test]
    fn scores_are_probabilities(d in labelled(120, 5), seed in any::<u64>()) {
        for kind in ["tree", "forest", "gbdt", "knn"] {
            let spec = match ClassifierSpec::from_name(kind).unwrap().with_seed(seed) {
                ClassifierSpec::Forest(mut p) => {
                    p.n_trees = 10;
                    ClassifierSpec::Forest(p)
                }
                ClassifierSpec::Gbdt(mut p) => {
                    p.rounds = 10;
                    ClassifierSpec::Gbdt(p)
                }
                other => other,
            };
            let model = spec.train(&d).unwrap();
            let pred = model.predict(&d).unwrap();
            prop_assert!(pred.scores.iter().all(|s| (0.0..=1.0).contains(s)));
            prop_assert!(pred.labels.iter().all(|&l| l <= 1));
        }
    }

    #[test]
    fn scaled_columns_are_standard(d in labelled(150, 6)) {
        let s = fit_scaler(&d).unwrap();
        let z = s.transform(&d).unwrap();
        for j in 0..z.n_features() {
            let c = z.column(j);
            let n = c.len() as f64;
            let m = c.iter().sum::<f64>() / n;
            let v = c.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / n;
            prop_assert!(m.abs() < 1e-9);
            prop_assert!(s.std(j) == 0.0 || (v - 1.0).abs() < 1e-9, "var {}", v);
        }
        prop_assert!(s.transform(&z).is_err());
    }
}

/// Distinct rows so that 1-NN recalls every training label.
#[test]
fn one_nearest_neighbour_memorises() {
    let d = generate(&SynthSpec {
        n_rows: 400,
        seed: 5,
        ..SynthSpec::default()
    })
    .unwrap()
    .dataset;
    let model = ClassifierSpec::Knn(KnnParams { k: 1 }).train(&d).unwrap();
    assert_eq!(model.predict(&d).unwrap().labels, d.y());
}

fn permuted(d: &Dataset, seed: u64) -> (Dataset, Vec<usize>) {
    use rand::seq::SliceRandom;
    let mut order: Vec<usize> = (0..d.n_rows()).collect();
    order.shuffle(&mut oracle::rng(seed));
    (d.subset_rows(&order), order)
}

#[test]
fn tree_and_knn_ignore_row_order() {
    let mut rng = oracle::rng(17);
    for case in 0..20 {
        let d = oracle::random_dataset(&mut rng, 150, 5);
        let (shuffled, _) = permuted(&d, case);
        for spec in [
            ClassifierSpec::Tree(TreeParams::default()),
            ClassifierSpec::Knn(KnnParams { k: 3 }),
        ] {
            let a = spec.train(&d).unwrap().predict(&d).unwrap();
            let b = spec.train(&shuffled).unwrap().predict(&d).unwrap();
            if matches!(spec, ClassifierSpec::Tree(_)) {
                assert_eq!(a, b, "case {case}");
            } else {
                // equidistant neighbours resolve by row position, so compare
                // only where the k-th and (k+1)-th distances differ
                let knn = match spec.train(&d).unwrap() {
                    flowsieve::classifiers::ClassifierModel::Knn(m) => m,
                    _ => unreachable!(),
                };
                for r in 0..d.n_rows() {
                    let mut dist: Vec<f64> = (0..d.n_rows())
                        .map(|i| d.row(i).iter().zip(d.row(r)).map(|(u, v)| (u - v) * (u - v)).sum())
                        .collect();
                    dist.sort_by(f64::total_cmp);
                    if dist[knn.k - 1] < dist[knn.k] {
                        assert_eq!(a.labels[r], b.labels[r], "case {case} row {r}");
                    }
                }
            }
        }
    }
}

#[test]
fn boosting_beats_forest_log_loss_on_blobs() {
    let d = generate(&SynthSpec {
        n_rows: 5000,
        n_informative: 3,
        n_noise: 7,
        separation: 6.0,
        seed: 20240601,
        ..SynthSpec::default()
    })
    .unwrap()
    .dataset;
    let (train, test) = flowsieve::evaluation::stratified_split(&d, 0.3, 7).unwrap();
    let log_loss = |kind: &str| {
        let model = ClassifierSpec::from_name(kind)
            .unwrap()
            .with_seed(7)
            .train(&train)
            .unwrap();
        let p = model.predict(&test).unwrap().scores;
        let eps = 1e-12;
        p.iter()
            .zip(test.y())
            .map(|(&s, &y)| {
                let s = s.clamp(eps, 1.0 - eps);
                if y == 1 {
                    -s.ln()
                } else {
                    -(1.0 - s).ln()
                }
            })
            .sum::<f64>()
            / p.len() as f64
    };
    let (g, f) = (log_loss("gbdt"), log_loss("forest"));
    assert!(g < f, "gbdt {g} forest {f}");
}
