use std::collections::HashSet;

use proptest::prelude::*;

use twostage::imbalance::{induce_indices, minority_mask, random_class_order, ImbalancePlan, RatioMode, Scenario};
use twostage::metrics::{self, average_ranks, ConfusionMatrix};
use twostage::resampling::{Origin, ResamplerKind};
use twostage::{stratified_kfold, Dataset, Matrix, SeededRng};

fn dataset_strategy() -> impl Strategy<Value = Dataset> {
    (2usize..5, 1usize..4).prop_flat_map(|(m, dim)| {
        (prop::collection::vec(1usize..15, m), Just(dim), any::<u64>()).prop_map(move |(counts, dim, seed)| {
            use rand::Rng;
            let mut rng = SeededRng::new(seed);
            let mut rows = Vec::new();
            let mut labels = Vec::new();
            for (c, &n) in counts.iter().enumerate() {
                for _ in 0..n {
                    rows.push((0..dim).map(|_| rng.random_range(-100.0..100.0)).collect::<Vec<f64>>());
                    labels.push(c);
                }
            }
            Dataset::new(Matrix::from_rows(&rows).unwrap(), labels, counts.len()).unwrap()
        })
    })
}

fn confusion_strategy() -> impl Strategy<Value = Vec<Vec<u64>>> {
    (2usize..7).prop_flat_map(|m| {
        prop::collection::vec(prop::collection::vec(0u64..30, m), m).prop_filter("every class present", |rows| {
            rows.iter().all(|r| r.iter().sum::<u64>() > 0)
        })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn csv_round_trip_is_exact(ds in dataset_strategy()) {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.csv");
        ds.save_csv(&path).unwrap();
        let back = Dataset::load_csv(&path).unwrap();
        prop_assert_eq!(back, ds);
    }

    #[test]
    fn kfold_is_a_stratified_partition(ds in dataset_strategy(), k in 2usize..4, seed in any::<u64>()) {
        prop_assume!(ds.class_counts().iter().all(|&c| c >= k));
        let folds = stratified_kfold(&ds, k, &mut SeededRng::new(seed)).unwrap();
        let mut seen = HashSet::new();
        for f in 0..k {
            let test = folds.test_indices(f);
            for &i in &test {
                prop_assert!(seen.insert(i));
            }
            let (train, test_ds) = folds.split(&ds, f).unwrap();
            prop_assert_eq!(train.len() + test_ds.len(), ds.len());
            for (c, &n) in ds.class_counts().iter().enumerate() {
                let got = test_ds.class_counts()[c];
                prop_assert!(got == n / k || got == n / k + 1);
            }
        }
        prop_assert_eq!(seen.len(), ds.len());
    }

    #[test]
    fn metrics_invariant_under_class_relabelling(rows in confusion_strategy(), seed in any::<u64>()) {
        use rand::seq::SliceRandom;
        let m = rows.len();
        let mut perm: Vec<usize> = (0..m).collect();
        perm.shuffle(&mut SeededRng::new(seed));
        let mut permuted = vec![vec![0u64; m]; m];
        for i in 0..m {
            for j in 0..m {
                permuted[perm[i]][perm[j]] = rows[i][j];
            }
        }
        let a = ConfusionMatrix::from_rows(&rows).unwrap();
        let b = ConfusionMatrix::from_rows(&permuted).unwrap();
        for f in [metrics::accuracy, metrics::avacc, metrics::cba, metrics::mavg] {
            let (x, y) = (f(&a).unwrap(), f(&b).unwrap());
            prop_assert!((x - y).abs() < 1e-12);
            prop_assert!((0.0..=1.0).contains(&x));
        }
        let recalls = a.recalls().unwrap();
        let weighted: f64 = (0..m).map(|i| a.row_sum(i) as f64 / a.total() as f64 * recalls[i]).sum();
        prop_assert!((weighted - metrics::accuracy(&a).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn tie_free_ranks_sum_to_triangular_number(scores in prop::collection::vec(prop::collection::hash_set(0u32..1000, 4), 1..6)) {
        let cells: Vec<Vec<f64>> = scores.iter().map(|s| s.iter().map(|&v| v as f64).collect()).collect();
        let ranks = average_ranks(&cells, true).unwrap();
        prop_assert!((ranks.iter().sum::<f64>() - 10.0).abs() < 1e-12);
    }

    #[test]
    fn resamplers_balance_and_trace(ds in dataset_strategy(), seed in any::<u64>(), k in 1usize..6) {
        let counts = ds.class_counts();
        let lo = *counts.iter().min().unwrap();
        let hi = *counts.iter().max().unwrap();
        let m = ds.num_classes();
        let mut rng = SeededRng::new(seed);
        for (kind, target) in [(ResamplerKind::Rus, lo), (ResamplerKind::Ros, hi), (ResamplerKind::Smote { k }, hi)] {
            let (out, origins) = kind.resample_traced(&ds, &mut rng).unwrap();
            prop_assert_eq!(out.class_counts(), vec![target; m]);
            prop_assert_eq!(origins.len(), out.len());
            for (j, o) in origins.iter().enumerate() {
                match *o {
                    Origin::Kept(i) | Origin::Duplicate(i) => prop_assert_eq!(out.row(j), ds.row(i)),
                    Origin::Synthetic { base, neighbor, .. } => {
                        prop_assert_eq!(ds.labels()[base], ds.labels()[neighbor]);
                        prop_assert_ne!(base, neighbor);
                    }
                }
            }
        }
    }

    #[test]
    fn same_seed_same_resample(ds in dataset_strategy(), seed in any::<u64>()) {
        for kind in [ResamplerKind::Rus, ResamplerKind::Ros, ResamplerKind::smote()] {
            let a = kind.resample(&ds, &mut SeededRng::new(seed)).unwrap();
            let b = kind.resample(&ds, &mut SeededRng::new(seed)).unwrap();
            prop_assert_eq!(a, b);
        }
    }

    #[test]
    fn induction_is_nested_with_stable_roles(
        m in 2usize..7,
        n in 10usize..40,
        scenario in prop::sample::select(Scenario::ALL.to_vec()),
        seed in any::<u64>(),
        mut levels in prop::collection::vec(1.0f64..8.0, 1..4),
    ) {
        levels.sort_by(f64::total_cmp);
        levels.dedup();
        let labels: Vec<usize> = (0..m * n).map(|i| i % m).collect();
        let feats: Vec<Vec<f64>> = (0..m * n).map(|i| vec![i as f64]).collect();
        let ds = Dataset::new(Matrix::from_rows(&feats).unwrap(), labels, m).unwrap();
        let mut rng = SeededRng::new(seed);
        let order = random_class_order(m, &mut rng);
        let plan = ImbalancePlan { scenario, class_order: order.clone(), levels, n_per_class: n, ratio_mode: RatioMode::RatioLinear };
        let sets = induce_indices(&ds, &plan, &mut rng).unwrap();
        for w in sets.windows(2) {
            let lo: HashSet<_> = w[0].iter().collect();
            prop_assert!(w[1].iter().all(|i| lo.contains(i)));
        }
        let mask = minority_mask(scenario, &order, m).unwrap();
        for set in &sets {
            let mut counts = vec![0; m];
            for &i in set { counts[ds.labels()[i]] += 1; }
            let max_majority = (0..m).filter(|&c| !mask[c]).map(|c| counts[c]).max().unwrap();
            prop_assert_eq!(max_majority, n);
            for c in 0..m {
                prop_assert!(counts[c] <= n && counts[c] > 0);
            }
        }
    }
}
