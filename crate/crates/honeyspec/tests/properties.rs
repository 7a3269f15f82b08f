//! Property tests for the cross-module invariants.

use proptest::prelude::*;

use honeyspec::dataset::{
    load_dataset, synth_generate, SpectralDataset, SpectrumRecord, Standardizer, SynthSpec,
    WavelengthGrid,
};
use honeyspec::eval::make_group_folds;
use honeyspec::linalg::Mat;
use honeyspec::report::format_score;

fn arbitrary_record(
    band_count: usize,
) -> impl Strategy<Value = (u8, u8, Option<u32>, u8, u8, Vec<f64>)> {
    (
        0u8..20,
        0u8..6,
        proptest::option::of(0u32..4),
        0u8..4,
        0u8..3,
        proptest::collection::vec(
            prop_oneof![
                -1.0e6..1.0e6f64,
                -1.0..1.0f64,
                Just(0.0),
                -1.0e-6..1.0e-6f64,
            ],
            band_count,
        ),
    )
}

fn dataset_strategy() -> impl Strategy<Value = SpectralDataset> {
    (1usize..6, 1usize..30)
        .prop_flat_map(|(band_count, n)| {
            proptest::collection::vec(arbitrary_record(band_count), n)
                .prop_map(move |rows| (band_count, rows))
        })
        .prop_map(|(band_count, rows)| {
            let levels = [0u32, 5, 10, 25, 50];
            let records: Vec<SpectrumRecord> = rows
                .into_iter()
                .enumerate()
                .map(|(i, (rec, group, acq, origin, level, bands))| {
                    // group identity decides origin and level so the
                    // one-image-one-sample invariant holds by construction
                    let _ = (origin, level);
                    let class_origin = group % 3;
                    let class_level = levels[(group as usize) % levels.len()];
                    SpectrumRecord {
                        record_id: format!("r{i:03}-{rec}"),
                        group_id: format!("g{group}"),
                        acquisition_id: acq,
                        origin: format!("origin{class_origin}"),
                        level: class_level,
                        bands,
                    }
                })
                .collect();
            SpectralDataset::from_records(
                WavelengthGrid::new(400.0, 5.0, band_count).unwrap(),
                records,
            )
            .unwrap()
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    /// Serialize-then-load returns a record-wise identical dataset.
    #[test]
    fn csv_round_trip_is_lossless(ds in dataset_strategy()) {
        let text = ds.to_csv_string();
        let reloaded = load_dataset(text.as_bytes(), &ds.grid, &ds.level_set).unwrap();
        prop_assert_eq!(&ds.records, &reloaded.records);
        prop_assert_eq!(&ds.origin_vocabulary, &reloaded.origin_vocabulary);
        prop_assert_eq!(&ds.level_set, &reloaded.level_set);
    }

    /// Every generated dataset is valid and split_by_origin partitions it.
    #[test]
    fn synth_validates_and_splits_cleanly(
        origins in 1usize..4,
        n_levels in 1usize..4,
        groups in 1usize..4,
        records in 1usize..4,
        bands in 1usize..24,
        seed in any::<u64>(),
    ) {
        let spec = SynthSpec {
            origins,
            levels: [0u32, 5, 10, 25][..n_levels].to_vec(),
            groups_per_class: groups,
            records_per_group: records,
            class_mean_separation: 4.0,
            noise_sd: 0.7,
            band_count: bands,
        };
        let ds = synth_generate(&spec, seed).unwrap();
        prop_assert!(ds.validate().is_empty());

        let parts = ds.split_by_origin();
        prop_assert_eq!(parts.len(), origins);
        let mut ids: Vec<&str> = parts
            .iter()
            .flat_map(|(_, d)| d.records.iter().map(|r| r.record_id.as_str()))
            .collect();
        ids.sort_unstable();
        ids.dedup();
        prop_assert_eq!(ids.len(), ds.records.len());
    }

    /// A fitted standardizer centers its own training matrix.
    #[test]
    fn standardizer_centers_training_data(
        n in 1usize..20,
        p in 1usize..6,
        raw in proptest::collection::vec(-1.0e3..1.0e3f64, 120),
    ) {
        let data: Vec<f64> = raw.into_iter().take(n * p).collect();
        prop_assume!(data.len() == n * p);
        let x = Mat::from_vec(n, p, data);
        let s = Standardizer::fit(&x);
        let z = s.apply(&x);
        for mean in z.col_means() {
            prop_assert!(mean.abs() < 1e-10, "column mean {mean}");
        }
    }

    /// Fold plans never split a group and test each group exactly once.
    #[test]
    fn fold_plans_respect_groups(
        origins in 1usize..3,
        groups in 2usize..5,
        n_folds in 2usize..5,
        seed in any::<u64>(),
    ) {
        let spec = SynthSpec {
            origins,
            levels: vec![0, 25],
            groups_per_class: groups,
            records_per_group: 2,
            class_mean_separation: 5.0,
            noise_sd: 0.5,
            band_count: 4,
        };
        let ds = synth_generate(&spec, seed).unwrap();
        let total_groups = origins * 2 * groups;
        prop_assume!(total_groups >= n_folds);
        let plan = make_group_folds(&ds, n_folds, seed).unwrap();
        let mut tested = std::collections::BTreeSet::new();
        for fold in &plan.folds {
            prop_assert!(fold.train_groups.is_disjoint(&fold.test_groups));
            for g in &fold.test_groups {
                prop_assert!(tested.insert(g.clone()));
            }
        }
        prop_assert_eq!(tested.len(), total_groups);
    }

    /// Scores always render as four decimals and parse back close to the
    /// input.
    #[test]
    fn format_score_is_stable(v in 0.0..=1.0f64) {
        let text = format_score(v);
        let frac = text.split('.').nth(1).unwrap();
        prop_assert_eq!(frac.len(), 4);
        let back: f64 = text.parse().unwrap();
        prop_assert!((back - v).abs() <= 5e-5 + 1e-12);
    }
}
